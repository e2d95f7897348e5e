// Copyright 2026 The genleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>

#include "genleak/io.h"
#include "genleak/training.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

namespace {

std::vector<std::string> aux_columns(ModelFamily family) {
  switch (family) {
    case ModelFamily::gan: return {"d_loss_real", "d_loss_fake"};
    case ModelFamily::vaegan: return {"kl", "recon"};
    case ModelFamily::began: return {"k", "convergence"};
  }
  return {};
}

}  // namespace

std::string metrics_header(ModelFamily family) {
  std::string out = "step,epoch,d_loss,g_loss";
  for (const auto& c : aux_columns(family)) out += "," + c;
  return out;
}

std::string metrics_line(ModelFamily family, const MetricRow& row) {
  std::string out = str_cat(row.step, ",", row.epoch, ",", format_number(row.losses.d_loss),
                            ",", format_number(row.losses.g_loss));
  for (const auto& c : aux_columns(family)) {
    auto it = row.losses.aux.find(c);
    out += ",";
    if (it != row.losses.aux.end()) out += format_number(it->second);
  }
  return out;
}

std::string metrics_csv(ModelFamily family, std::span<const MetricRow> rows) {
  std::string out = metrics_header(family) + "\n";
  for (const auto& r : rows) out += metrics_line(family, r) + "\n";
  return out;
}

Trainer::Trainer(GanModel model, Tensor records, TrainConfig cfg)
    : model_(std::move(model)), records_(std::move(records)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (records_.rank() < 2 || records_.dim(0) == 0) {
    throw InvalidArgument(str_cat("training records must be [n, ...] with n >= 1, got ",
                                  shape_str(records_.shape())));
  }
  if (model_.family == ModelFamily::vaegan && !model_.encoder) {
    throw InvalidArgument("vaegan model has no encoder");
  }
  std::size_t n = records_.dim(0);
  cfg_.dp.sampling_rate =
      std::min(1.0, static_cast<double>(cfg_.batch_size) / static_cast<double>(n));
  if (total_steps() == 0) throw InvalidArgument("training length is zero (set epochs or max_steps)");
}

Trainer Trainer::resume(Checkpoint ckpt, Tensor records) {
  Trainer t(std::move(ckpt.model), std::move(records), std::move(ckpt.config));
  if (ckpt.step > t.total_steps()) {
    throw InvalidArgument(str_cat("checkpoint step ", ckpt.step, " exceeds the run length ",
                                  t.total_steps()));
  }
  t.step_ = ckpt.step;
  return t;
}

std::size_t Trainer::total_steps() const { return cfg_.total_steps(records_.dim(0)); }

std::uint64_t Trainer::epoch() const { return step_ / cfg_.steps_per_epoch(records_.dim(0)); }

Tensor Trainer::batch_for_step(std::uint64_t step) const {
  std::size_t n = records_.dim(0);
  std::size_t spe = cfg_.steps_per_epoch(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::derive(cfg_.seed, "epoch", step / spe);
  rng.shuffle(std::span<std::size_t>(perm));
  std::size_t begin = (step % spe) * cfg_.batch_size;
  std::size_t end = std::min(n, begin + cfg_.batch_size);
  std::size_t per = records_.numel() / n;
  Shape shape = records_.shape();
  shape[0] = end - begin;
  Tensor batch(shape);
  for (std::size_t i = begin; i < end; ++i) {
    std::copy_n(records_.data().begin() + static_cast<long>(perm[i] * per), per,
                batch.data().begin() + static_cast<long>((i - begin) * per));
  }
  return batch;
}

StepLosses Trainer::step() {
  if (finished()) throw InvalidArgument("training already finished");
  Tensor batch = batch_for_step(step_);
  Rng rng = Rng::derive(cfg_.seed, "step", step_);
  GanModel snapshot = model_;
  try {
    StepLosses l;
    switch (model_.family) {
      case ModelFamily::gan: l = gan_step(model_, batch, cfg_, rng); break;
      case ModelFamily::vaegan: l = vaegan_step(model_, batch, cfg_, rng); break;
      case ModelFamily::began: l = began_step(model_, batch, cfg_, rng); break;
    }
    if (!std::isfinite(l.d_loss) || !std::isfinite(l.g_loss)) {
      throw DivergenceError(str_cat("non-finite loss (d_loss ", l.d_loss, ", g_loss ",
                                    l.g_loss, ")"));
    }
    ++step_;
    return l;
  } catch (const DivergenceError& e) {
    model_ = std::move(snapshot);
    throw DivergenceError(str_cat("training diverged at step ", step_, ": ", e.what(),
                                  "; model restored to step ", step_, ", last checkpoint: ",
                                  last_checkpoint_.empty() ? "none" : last_checkpoint_));
  }
}

void Trainer::run(std::size_t until, const std::function<void(const MetricRow&)>& sink) {
  while (!finished() && step_ < until) {
    std::uint64_t ep = epoch();
    StepLosses l = step();
    if (sink) sink(MetricRow{step_, ep, std::move(l)});
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_;
  c.config = cfg_;
  c.step = step_;
  c.epoch = epoch();
  c.rng_state = Rng::derive(cfg_.seed, "step", step_).save();
  return c;
}

GENLEAK_NAMESPACE_END
