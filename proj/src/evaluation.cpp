#include "fashion/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fashion/bridge.hpp"
#include "fashion/error.hpp"
#include "fashion/nn/adam.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/synth_data.hpp"

namespace fashion {

// ---------------------------------------------------------------- swap pairs

std::vector<int> make_swap_pairs(std::size_t count, std::uint64_t seed) {
  if (count < 2) throw Error(ErrorCode::TooFewIds, "a derangement needs at least two ids");
  Rng rng(seed);
  std::vector<int> p(count);
  for (;;) {
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = count - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(p[i], p[pick(rng)]);
    }
    bool fixed = false;
    for (std::size_t i = 0; i < count && !fixed; ++i) fixed = p[i] == static_cast<int>(i);
    if (!fixed) return p;
  }
}

std::vector<std::pair<std::string, std::string>> make_swap_pairs(std::span<const std::string> ids,
                                                                 std::uint64_t seed) {
  const auto p = make_swap_pairs(ids.size(), seed);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace_back(ids[i], ids[p[i]]);
  return out;
}

// ---------------------------------------------------------------- AP

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 0) {
      hits += 1;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw Error(ErrorCode::NoPositives, "average precision needs at least one positive");
  return sum / hits;
}

double mean_average_precision(std::span<const double> aps) {
  if (aps.empty()) throw Error(ErrorCode::InvalidArgument, "no APs to average");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

double percent_one_decimal(double value) { return std::round(value * 1000.0) / 10.0; }

// ---------------------------------------------------------------- constraint adherence

double constraint_iou(const SegMap& generated, const SpatialConstraint& constraint) {
  if (generated.height() != generated.width()) {
    throw Error(ErrorCode::ShapeMismatch, "constraint IoU needs a square map");
  }
  const LabelGrid a = argmax_labels(generated);
  const LabelGrid b = argmax_labels(upsample_nearest(constraint.probs(), generated.height()));
  double sum = 0;
  int classes = 0;
  for (int c : {kBackground, kHair, kFace}) {
    long inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.labels.size(); ++k) {
      const bool x = a.labels[k] == c, y = b.labels[k] == c;
      inter += x && y;
      uni += x || y;
    }
    if (uni > 0) {
      sum += static_cast<double>(inter) / static_cast<double>(uni);
      ++classes;
    }
  }
  return classes == 0 ? 1.0 : sum / classes;
}

// ---------------------------------------------------------------- detector

namespace {

// The convolution stack ends in a {C, N, s, s} map; the linear head wants
// dense {C*s*s, N}. Flatten sits between them.
template <typename T>
class Flatten final : public nn::Layer<T> {
 public:
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool) override {
    shape_ = x.shape();
    return nn::map_to_dense(x);
  }
  nn::Tensor<T> infer(const nn::Tensor<T>& x) const override { return nn::map_to_dense(x); }
  nn::Tensor<T> backward(const nn::Tensor<T>& g) override {
    return nn::dense_to_map(g, shape_[0], shape_[2], shape_[3]);
  }

 private:
  std::array<int, 4> shape_{};
};

}  // namespace


AttributeDetector::AttributeDetector(int resolution, std::uint64_t seed, int width)
    : resolution_(resolution), width_(width) {
  if (resolution < 16 || resolution % 16 != 0) {
    throw Error(ErrorCode::InvalidArgument, "detector resolution must be a multiple of 16");
  }
  Rng rng(seed);
  const std::array<int, 4> widths = {width, 2 * width, 4 * width, 4 * width};
  int in = 3;
  for (int w : widths) {
    net_.add<nn::Conv2d<float>>(in, w, 4, 2, 1, rng);
    net_.add<nn::ReLU<float>>(0.2f);
    in = w;
  }
  const int side = resolution / 16;
  feat_ = in * side * side;
  net_.add<Flatten<float>>();
  net_.add<nn::Linear<float>>(feat_, kNumStructureAttributes, rng);
}

nn::Tensor<float> AttributeDetector::batch_tensor(std::span<const ImageRGB> images) const {
  nn::Tensor<float> t(3, static_cast<int>(images.size()), resolution_, resolution_);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].height() != resolution_ || images[n].width() != resolution_) {
      throw Error(ErrorCode::ShapeMismatch, "detector expects " + std::to_string(resolution_) + " pixel images");
    }
    write_sample(t, static_cast<int>(n), images[n].pixels());
  }
  return t;
}

nn::ParameterList<float> AttributeDetector::parameters() {
  nn::ParameterList<float> out;
  net_.collect(out, "detector.");
  return out;
}


std::vector<std::array<double, kNumStructureAttributes>> AttributeDetector::predict(
    std::span<const ImageRGB> images) const {
  std::vector<std::array<double, kNumStructureAttributes>> out;
  const std::size_t bs = 64;
  for (std::size_t s = 0; s < images.size(); s += bs) {
    const auto chunk = images.subspan(s, std::min(bs, images.size() - s));
    const auto logits = net_.infer(batch_tensor(chunk));
    for (int n = 0; n < logits.batch(); ++n) {
      std::array<double, kNumStructureAttributes> p{};
      for (int k = 0; k < kNumStructureAttributes; ++k) p[k] = sigmoid(static_cast<double>(logits.at(k, n, 0, 0)));
      out.push_back(p);
    }
  }
  return out;
}

AttributeDetector::FitReport AttributeDetector::fit(std::span<const PersonRecord> records, int epochs,
                                                    int batch_size, std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorCode::DatasetEmpty, "no detector training records");
  for (const auto& r : records) {
    if (!r.structure) throw Error(ErrorCode::InvalidArgument, "record " + r.id + " has no structure labels");
  }
  nn::Adam<float> adam(parameters(), nn::AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  Rng rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  FitReport report;
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    int batches = 0;
    for (std::size_t s = 0; s < order.size(); s += batch_size) {
      const std::size_t n = std::min<std::size_t>(batch_size, order.size() - s);
      nn::Tensor<float> x(3, static_cast<int>(n), resolution_, resolution_);
      nn::Tensor<float> y(kNumStructureAttributes, static_cast<int>(n));
      for (std::size_t j = 0; j < n; ++j) {
        const auto& r = records[order[s + j]];
        write_sample(x, static_cast<int>(j), r.image.pixels());
        for (int k = 0; k < kNumStructureAttributes; ++k) y.at(k, static_cast<int>(j), 0, 0) = (*r.structure)[k];
      }
      for (auto& v : x.values()) v += noise(rng);
      adam.zero_grad();
      const auto logits = net_.forward(x, true);
      nn::Tensor<float> g(kNumStructureAttributes, static_cast<int>(n));
      double loss = 0;
      const double denom = static_cast<double>(n) * kNumStructureAttributes;
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = logits[i], t = y[i];
        loss += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
        g[i] = static_cast<float>((sigmoid(l) - t) / denom);
      }
      net_.backward(g);
      adam.step();
      total += loss / denom;
      ++batches;
    }
    report.epoch_loss.push_back(total / std::max(batches, 1));
  }
  std::vector<ImageRGB> images;
  for (const auto& r : records) images.push_back(r.image);
  const auto pred = predict(images);
  long correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (int k = 0; k < kNumStructureAttributes; ++k) correct += (pred[i][k] > 0.5) == (*records[i].structure)[k];
  report.train_accuracy = static_cast<double>(correct) / (static_cast<double>(records.size()) * kNumStructureAttributes);
  return report;
}

Checkpoint AttributeDetector::to_checkpoint() const {
  Checkpoint ck;
  ck.manifest["stage"] = "detector";
  ck.manifest["resolution"] = resolution_;
  ck.manifest["width"] = width_;
  store_parameters(ck, const_cast<AttributeDetector*>(this)->parameters());
  return ck;
}

AttributeDetector AttributeDetector::from_checkpoint(const Checkpoint& ck) {
  if (ck.stage() != "detector") throw Error(ErrorCode::StageMismatch, "checkpoint is not a detector");
  AttributeDetector d(ck.manifest.at("resolution").get<int>(), 0, ck.manifest.at("width").get<int>());
  restore_parameters(ck, d.parameters());
  return d;
}

// ---------------------------------------------------------------- protocol

RedressFn pipeline_redress(const StageModel& shape, const StageModel& image) {
  return [&shape, &image](const PersonRecord& person, std::string_view caption, std::uint64_t seed) {
    return infer_pipeline(person, caption, {derive_seed(seed, 0), derive_seed(seed, 1)}, shape, image).image;
  };
}

RedressFn one_step_redress(const StageModel& model) {
  return [&model](const PersonRecord& person, std::string_view caption, std::uint64_t seed) {
    return infer_one_step(person, caption, derive_seed(seed, 0), model);
  };
}

namespace {

void check_structure(std::span<const PersonRecord> test) {
  for (const auto& r : test) {
    if (!r.structure) throw Error(ErrorCode::InvalidArgument, "test record " + r.id + " has no structure labels");
  }
}

void score(SwapProtocolResult& res) {
  for (int k = 0; k < kNumStructureAttributes; ++k) {
    std::vector<double> s;
    std::vector<int> l;
    for (const auto& p : res.predictions) {
      s.push_back(p.scores[k]);
      l.push_back(p.truth[k]);
    }
    res.ap[k] = average_precision(s, l);
  }
  res.map = mean_average_precision(res.ap);
}

template <typename Scorer>
SwapProtocolResult run_protocol(const std::string& name, std::span<const PersonRecord> test, std::uint64_t seed,
                                Scorer&& scorer) {
  check_structure(test);
  SwapProtocolResult res;
  res.model = name;
  const auto perm = make_swap_pairs(test.size(), seed);
  std::vector<ImageRGB> images;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& a = test[i];
    const auto& b = test[perm[i]];
    res.pairs.emplace_back(a.id, b.id);
    SwapPrediction p;
    p.person_id = a.id;
    p.caption_id = b.id;
    p.truth = *b.structure;
    res.predictions.push_back(p);
  }
  scorer(perm, res.predictions);
  score(res);
  return res;
}

}  // namespace

SwapProtocolResult run_swap_protocol(const std::string& name, const RedressFn& model,
                                     std::span<const PersonRecord> test, const AttributeDetector& detector,
                                     std::uint64_t seed) {
  return run_protocol(name, test, seed, [&](const std::vector<int>& perm, std::vector<SwapPrediction>& preds) {
    std::vector<ImageRGB> images;
    for (std::size_t i = 0; i < test.size(); ++i) {
      images.push_back(model(test[i], test[perm[i]].caption, derive_seed(seed, 10000 + i)));
    }
    const auto scores = detector.predict(images);
    for (std::size_t i = 0; i < preds.size(); ++i) preds[i].scores = scores[i];
  });
}

SwapProtocolResult run_swap_upper_bound(std::span<const PersonRecord> test, const AttributeDetector& detector,
                                        std::uint64_t seed) {
  return run_protocol("Original (upper bound)", test, seed,
                      [&](const std::vector<int>& perm, std::vector<SwapPrediction>& preds) {
                        std::vector<ImageRGB> images;
                        for (std::size_t i = 0; i < test.size(); ++i) images.push_back(test[perm[i]].image);
                        const auto scores = detector.predict(images);
                        for (std::size_t i = 0; i < preds.size(); ++i) preds[i].scores = scores[i];
                      });
}

SwapProtocolResult run_swap_constant(std::span<const PersonRecord> test, std::uint64_t seed) {
  return run_protocol("Constant 0.5", test, seed, [](const std::vector<int>&, std::vector<SwapPrediction>& preds) {
    for (auto& p : preds) p.scores.fill(0.5);
  });
}

nlohmann::ordered_json swap_report_json(std::span<const SwapProtocolResult> rows) {
  nlohmann::ordered_json out;
  out["attributes"] = structure_attribute_names();
  auto& models = out["models"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json m;
    m["name"] = r.model;
    m["ap"] = r.ap;
    m["map"] = r.map;
    m["map_percent"] = percent_one_decimal(r.map);
    auto& pairs = m["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : r.predictions) {
      pairs.push_back({{"person", p.person_id}, {"caption_from", p.caption_id}, {"scores", p.scores},
                       {"truth", p.truth}});
    }
    models.push_back(std::move(m));
  }
  return out;
}

std::string swap_report_table(std::span<const SwapProtocolResult> rows) {
  std::ostringstream os;
  os << std::left << std::setw(26) << "Model";
  for (auto n : structure_attribute_names()) os << std::right << std::setw(15) << n;
  os << std::setw(8) << "mAP" << '\n';
  os << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    os << std::left << std::setw(26) << r.model << std::right;
    for (double ap : r.ap) os << std::setw(15) << percent_one_decimal(ap);
    os << std::setw(8) << percent_one_decimal(r.map) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- ranking

RankingStats ranking_stats(const std::map<std::string, std::map<std::string, int>>& ratings) {
  if (ratings.empty()) throw Error(ErrorCode::InvalidPermutation, "no rated items");
  RankingStats st;
  for (const auto& [method, rank] : ratings.begin()->second) st.methods.push_back(method);
  const int m = static_cast<int>(st.methods.size());
  st.frequency.assign(m, std::vector<int>(m, 0));
  std::vector<double> sum(m, 0), sum2(m, 0);
  for (const auto& [item, ranks] : ratings) {
    std::vector<bool> seen(m, false);
    if (static_cast<int>(ranks.size()) != m) {
      throw Error(ErrorCode::InvalidPermutation, "item " + item + " does not rank every method");
    }
    int i = 0;
    for (const auto& [method, rank] : ranks) {
      if (method != st.methods[i]) throw Error(ErrorCode::InvalidPermutation, "item " + item + " ranks other methods");
      if (rank < 1 || rank > m || seen[rank - 1]) {
        throw Error(ErrorCode::InvalidPermutation, "item " + item + " ranks are not a permutation of 1.." +
                                                       std::to_string(m));
      }
      seen[rank - 1] = true;
      sum[i] += rank;
      sum2[i] += static_cast<double>(rank) * rank;
      ++st.frequency[i][rank - 1];
      ++i;
    }
  }
  st.items = static_cast<int>(ratings.size());
  for (int i = 0; i < m; ++i) {
    const double mu = sum[i] / st.items;
    st.mean.push_back(mu);
    st.stddev.push_back(std::sqrt(std::max(0.0, sum2[i] / st.items - mu * mu)));
  }
  return st;
}

std::map<std::string, std::map<std::string, int>> read_ratings_csv(std::string_view text) {
  std::map<std::string, std::map<std::string, int>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (line_no == 1 && !cells.empty() && cells[0] == "item_id") continue;
    if (cells.size() != 3) {
      throw Error(ErrorCode::Format, "ratings line " + std::to_string(line_no) + ": expected item_id,method,rank");
    }
    int rank = 0;
    auto [ptr, ec] = std::from_chars(cells[2].data(), cells[2].data() + cells[2].size(), rank);
    if (ec != std::errc() || ptr != cells[2].data() + cells[2].size()) {
      throw Error(ErrorCode::Format, "ratings line " + std::to_string(line_no) + ": rank is not an integer");
    }
    if (!out[cells[0]].emplace(cells[1], rank).second) {
      throw Error(ErrorCode::InvalidPermutation, "item " + cells[0] + " rates " + cells[1] + " twice");
    }
  }
  return out;
}

// ---------------------------------------------------------------- interpolation

InterpolationMode parse_interpolation_mode(std::string_view name) {
  if (name == "shape") return InterpolationMode::kShape;
  if (name == "texture") return InterpolationMode::kTexture;
  if (name == "both") return InterpolationMode::kBoth;
  throw Error(ErrorCode::InvalidArgument, "interpolation mode must be shape, texture or both");
}

StageInputs lerp_inputs(const StageInputs& a, const StageInputs& b, double t) {
  const float tb = static_cast<float>(t), ta = 1.0f - tb;
  StageInputs out;
  for (int i = 0; i < kNoiseDim; ++i) out.z.values[i] = ta * a.z.values[i] + tb * b.z.values[i];
  for (int i = 0; i < kTextDim; ++i) out.text[i] = ta * a.text[i] + tb * b.text[i];
  return out;
}

std::vector<WalkFrame> interpolation_walk(const PersonRecord& person, const WalkEndpoint& a, const WalkEndpoint& b,
                                          InterpolationMode mode, int steps, const StageModel& shape,
                                          const StageModel& image) {
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "an interpolation walk needs at least two steps");
  const StageInputs sa{LatentNoise::sample(a.seeds.shape), shape.encode_caption(a.caption)};
  const StageInputs sb{LatentNoise::sample(b.seeds.shape), shape.encode_caption(b.caption)};
  const StageInputs ia{LatentNoise::sample(a.seeds.image), image.encode_caption(a.caption)};
  const StageInputs ib{LatentNoise::sample(b.seeds.image), image.encode_caption(b.caption)};
  std::vector<WalkFrame> frames;
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / (steps - 1);
    const StageInputs s = mode == InterpolationMode::kTexture ? sa : lerp_inputs(sa, sb, t);
    const StageInputs i = mode == InterpolationMode::kShape ? ia : lerp_inputs(ia, ib, t);
    auto out = run_pipeline(person, s, i, shape, image);
    frames.push_back({std::move(out.shape_map), std::move(out.image)});
  }
  return frames;
}

}  // namespace fashion
