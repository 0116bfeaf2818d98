// Copyright 2026 The stok Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stok/model.hpp"

#include <algorithm>
#include <numeric>

namespace stok {

using json = nlohmann::json;

void BackboneConfig::validate() const {
  if (d_in <= 0) throw ConfigError("backbone: missing d_in");
  if (num_classes < 2) throw ConfigError("backbone: num_classes must be >= 2");
  if (width % heads != 0) throw ConfigError("backbone: width not divisible by heads");
  if (width % 4 != 0) throw ConfigError("backbone: width must be divisible by 4");
  if (depth < 1) throw ConfigError("backbone: depth must be >= 1");
  if (stem != "conv4x4_overlap" && stem != "conv2x2") {
    throw ConfigError("backbone: stem must be conv4x4_overlap or conv2x2");
  }
}

json BackboneConfig::to_json() const {
  return json{{"grid_h", grid_h},   {"grid_w", grid_w},
              {"d_in", d_in},       {"num_classes", num_classes},
              {"width", width},     {"heads", heads},
              {"depth", depth},     {"mlp_ratio", mlp_ratio},
              {"stem", stem},       {"seed", seed}};
}

BackboneConfig BackboneConfig::from_json(const json& j) {
  BackboneConfig c;
  c.grid_h = j.at("grid_h").get<int>();
  c.grid_w = j.at("grid_w").get<int>();
  c.d_in = j.at("d_in").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.width = j.at("width").get<int>();
  c.heads = j.at("heads").get<int>();
  c.depth = j.at("depth").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.stem = j.at("stem").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void TrainRecipe::validate() const {
  if (epochs < 0 || batch <= 0) throw ConfigError("recipe: bad epoch/batch counts");
  if (lr <= 0) throw ConfigError("recipe: lr must be > 0");
  if (weight_decay < 0 || warmup_epochs < 0) {
    throw ConfigError("recipe: negative weight decay or warmup");
  }
  if (label_smoothing < 0 || label_smoothing >= 1) {
    throw ConfigError("recipe: label smoothing outside [0,1)");
  }
}

TokenDataset TokenDataset::load(const std::string& tokens_path,
                                const std::string& labels_path,
                                int num_classes) {
  TokenDataset ds;
  ds.grids = read_token_file(tokens_path);
  ds.grid_h = ds.grids[0].h;
  ds.grid_w = ds.grids[0].w;
  if (!labels_path.empty()) {
    ds.labels = read_label_file(labels_path);
    if (ds.labels.size() != ds.grids.size()) {
      throw DataError(strformat(
          "label file %s has %zu entries, token file %s has %zu grids",
          labels_path.c_str(), ds.labels.size(), tokens_path.c_str(),
          ds.grids.size()));
    }
    for (std::size_t i = 0; i < ds.grids.size(); ++i) {
      ds.grids[i].label = ds.labels[i];
    }
  }
  ds.num_classes = num_classes;
  if (num_classes > 0) {
    for (auto l : ds.labels) {
      if (l >= num_classes) {
        throw DataError(strformat("label %u outside [0,%d)", unsigned(l),
                                  num_classes));
      }
    }
  }
  return ds;
}

TrainResult train_supervised(Classifier<float>& model, const TokenDataset& train,
                             const TokenDataset& val, const Codebook& cb,
                             const TrainRecipe& recipe,
                             const TokenAugPipeline& pipeline) {
  recipe.validate();
  if (train.grids.empty()) throw DataError("train: empty dataset");
  if (train.labels.size() != train.grids.size()) {
    throw DataError("train: dataset has no labels");
  }
  const int C = model.cfg.num_classes;
  const int n = int(train.grids.size());
  const int steps_per_epoch = (n + recipe.batch - 1) / recipe.batch;
  const std::int64_t total_steps = std::int64_t(steps_per_epoch) * recipe.epochs;
  const std::int64_t warmup_steps =
      std::int64_t(recipe.warmup_epochs * steps_per_epoch);
  nn::AdamW<float> opt;
  TrainResult result;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(derive_seed(recipe.seed, 0x5f1e, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    std::int64_t epoch_batches = 0;
    for (int start = 0; start < n; start += recipe.batch, ++step) {
      int len = std::min(recipe.batch, n - start);
      AugBatch batch;
      batch.h = train.grid_h;
      batch.w = train.grid_w;
      batch.labels = MatF::Zero(len, C);
      std::vector<std::uint64_t> sample_index(len);
      for (int b = 0; b < len; ++b) {
        int gi = order[start + b];
        batch.tokens.push_back(train.grids[gi]);
        batch.labels(b, train.labels[gi]) = 1.f;
        sample_index[b] = std::uint64_t(gi);
      }
      AugBatchOut aug = pipeline.apply(batch, cb, recipe.seed, epoch, sample_index);

      nn::zero_grads(model);
      double batch_loss = 0;
      const double s = recipe.label_smoothing;
      for (int b = 0; b < len; ++b) {
        MatF target = aug.labels.row(b);
        if (s > 0) {
          target = target * float(1.0 - s);
          target.array() += float(s / C);
        }
        typename Classifier<float>::Cache cache;
        MatF logits = model.logits(aug.emb[b], &cache);
        MatF dlogits;
        batch_loss += nn::softmax_ce_soft(logits, target, &dlogits);
        model.backward(dlogits, cache);
      }
      batch_loss /= len;
      nn::scale_grads(model, 1.0 / len);
      double lr = nn::cosine_lr(recipe.lr, step, total_steps, warmup_steps);
      opt.step(model, lr, recipe.weight_decay);
      epoch_loss += batch_loss;
      ++epoch_batches;
    }
    result.metrics.push_back(strformat("%d,train,loss,%.6f", epoch,
                                       epoch_loss / std::max<std::int64_t>(1, epoch_batches)));
    if (!val.grids.empty()) {
      double top1 = evaluate_top1(model, val, cb);
      result.metrics.push_back(strformat("%d,val,top1,%.6f", epoch, top1));
      result.final_val_top1 = top1;
    }
  }
  return result;
}

double evaluate_top1(const Classifier<float>& model, const TokenDataset& data,
                     const Codebook& cb) {
  if (data.grids.empty()) throw DataError("evaluate: empty dataset");
  if (data.labels.size() != data.grids.size()) {
    throw DataError("evaluate: dataset has no labels");
  }
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < data.grids.size(); ++i) {
    EmbeddingGrid z = lookup(data.grids[i], cb);
    MatF logits = model.logits(z.values, nullptr);
    int arg = 0;
    float best = logits(0, 0);
    for (int k = 1; k < model.cfg.num_classes; ++k) {
      if (logits(0, k) > best) {
        best = logits(0, k);
        arg = k;
      }
    }
    correct += (arg == data.labels[i]);
  }
  return double(correct) / double(data.grids.size());
}

std::vector<double> evaluate_corrupt(const Classifier<float>& model,
                                     const LabeledImages& images,
                                     const Codebook& cb, int patch_size,
                                     CorruptKind kind,
                                     std::span<const int> severities,
                                     std::uint64_t seed) {
  if (images.images.empty()) throw DataError("evaluate_corrupt: empty dataset");
  std::vector<double> acc;
  for (int sev : severities) {
    std::uint64_t correct = 0;
    for (std::size_t i = 0; i < images.images.size(); ++i) {
      Rng rng = make_rng(derive_seed(seed, std::uint64_t(sev), i));
      Image corrupted = corrupt(images.images[i], kind, sev, rng);
      TokenGrid grid = tokenize_image(corrupted, cb, patch_size);
      EmbeddingGrid z = lookup(grid, cb);
      MatF logits = model.logits(z.values, nullptr);
      int arg = 0;
      float best = logits(0, 0);
      for (int k = 1; k < model.cfg.num_classes; ++k) {
        if (logits(0, k) > best) {
          best = logits(0, k);
          arg = k;
        }
      }
      correct += (arg == images.labels[i]);
    }
    acc.push_back(double(correct) / double(images.images.size()));
  }
  return acc;
}

std::vector<std::string> init_from_mtm(Classifier<float>& model,
                                       const std::string& mtm_path,
                                       const Codebook& active) {
  json config = nn::read_checkpoint_config(mtm_path, "SMTM");
  std::string bound = config.at("codebook_id").get<std::string>();
  if (bound != active.id) {
    throw PrereqError("mtm checkpoint " + mtm_path +
                      " is bound to a different codebook");
  }
  std::vector<std::string> allow = {"stem.", "head."};
  auto report = nn::load_checkpoint_partial(mtm_path, "SMTM", model, allow);
  return report.reinitialized;
}

void save_classifier(const std::string& path, Classifier<float>& model) {
  json config;
  config["kind"] = "classifier";
  config["config"] = model.cfg.to_json();
  config["codebook_id"] = model.codebook_id;
  nn::save_checkpoint(path, "SMOD", config, model);
}

Classifier<float> load_classifier(const std::string& path, const Codebook& active) {
  json config = nn::read_checkpoint_config(path, "SMOD");
  BackboneConfig cfg = BackboneConfig::from_json(config.at("config"));
  std::string bound = config.at("codebook_id").get<std::string>();
  if (bound != active.id) {
    throw PrereqError("classifier checkpoint " + path +
                      " is bound to a different codebook");
  }
  Classifier<float> model;
  model.init(cfg, bound);
  nn::load_checkpoint(path, "SMOD", model);
  return model;
}

}  // namespace stok
