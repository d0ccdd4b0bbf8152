#include "fashion/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fashion/baselines.hpp"
#include "fashion/bridge.hpp"
#include "fashion/error.hpp"
#include "fashion/image_gan.hpp"
#include "fashion/nn/adam.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/shape_gan.hpp"

namespace fashion {

GanLossValues gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  auto clip = [](double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); };
  double real = 0, fake = 0, gen = 0;
  for (double p : d_real) real -= std::log(clip(p));
  for (double p : d_fake) {
    fake -= std::log(1.0 - clip(p));
    gen -= std::log(clip(p));
  }
  GanLossValues out;
  const double nr = static_cast<double>(std::max<std::size_t>(d_real.size(), 1));
  const double nf = static_cast<double>(std::max<std::size_t>(d_fake.size(), 1));
  out.loss_d = real / nr + fake / nf;
  out.loss_g = gen / nf;
  return out;
}

// ---------------------------------------------------------------- config

namespace {

template <typename N>
N parse_number(std::string_view key, std::string_view v) {
  N out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::InvalidArgument, "bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::InvalidArgument, "bad value '" + std::string(v) + "' for " + std::string(key));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  arch().validate();
  if (batch_size < 2) throw Error(ErrorCode::InvalidArgument, "batch_size must be at least 2");
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be positive");
  if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (!(instance_noise >= 0 && std::isfinite(instance_noise))) {
    throw Error(ErrorCode::InvalidArgument, "instance_noise must be a finite non-negative number");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw Error(ErrorCode::InvalidArgument, "Adam betas must lie in [0, 1)");
  }
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "stage=" << stage_name(stage) << "\nepochs=" << epochs << "\nbatch_size=" << batch_size
     << "\nlearning_rate=" << learning_rate << "\nbeta1=" << beta1 << "\nbeta2=" << beta2
     << "\nresolution=" << resolution << "\ngen_width=" << gen_width << "\ndisc_width=" << disc_width
     << "\nseed=" << seed << "\ninstance_noise=" << instance_noise
     << "\nmismatch_pairs=" << (mismatch_pairs ? "true" : "false") << "\n";
  return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a(canonical()); }

const std::vector<std::pair<std::string, std::string>>& TrainConfig::documented_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"stage", "shape | image | one-step-8-7 | one-step-8-4 | non-comp"},
      {"epochs", "passes over the dataset (default 20)"},
      {"batch_size", "minibatch size, at least 2 (default 16)"},
      {"learning_rate", "Adam step size (default 2e-4)"},
      {"beta1", "Adam first-moment decay (default 0.5)"},
      {"beta2", "Adam second-moment decay (default 0.999)"},
      {"resolution", "32, 64 or 128; must match the dataset (default 32)"},
      {"gen_width", "generator base width (default 8)"},
      {"disc_width", "discriminator base width (default 16)"},
      {"seed", "master seed (default 1)"},
      {"instance_noise", "std of Gaussian noise on discriminator samples (default 0.2)"},
      {"mismatch_pairs", "true/false: real samples with a wrong caption count as fake (default true)"},
      {"dataset", "dataset directory"},
      {"checkpoint_dir", "where checkpoints are written"},
  };
  return keys;
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "stage") stage = parse_stage(value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "beta1") beta1 = parse_number<double>(key, value);
  else if (key == "beta2") beta2 = parse_number<double>(key, value);
  else if (key == "resolution") resolution = parse_number<int>(key, value);
  else if (key == "gen_width") gen_width = parse_number<int>(key, value);
  else if (key == "disc_width") disc_width = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "instance_noise") instance_noise = parse_number<double>(key, value);
  else if (key == "mismatch_pairs") mismatch_pairs = parse_bool(key, value);
  else if (key == "dataset") dataset = std::string(value);
  else if (key == "checkpoint_dir") checkpoint_dir = std::string(value);
  else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
}

TrainConfig TrainConfig::parse(std::string_view text, TrainConfig base) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected key=value");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

TrainConfig TrainConfig::parse(std::string_view text) { return parse(text, TrainConfig{}); }

// ---------------------------------------------------------------- model

StageModel::StageModel(StageKind kind, const ArchConfig& arch, Vocabulary vocab, std::uint64_t seed)
    : vocab_(std::move(vocab)),
      nets_(std::make_unique<StageNetworks<float>>(kind, arch, vocab_.size(), seed)) {}

std::array<float, kTextDim> StageModel::encode_caption(std::string_view caption) const {
  const TokenSequence tokens = tokenize(caption, vocab_);
  const auto v = nets_->text().infer(std::span<const TokenSequence>(&tokens, 1));
  std::array<float, kTextDim> out{};
  std::copy(v.values().begin(), v.values().end(), out.begin());
  return out;
}

DesignCoding StageModel::design_coding(const PersonRecord& person, std::string_view caption) const {
  const auto attrs = extract_attributes(person);
  const auto text = encode_caption(caption);
  return DesignCoding::concat(attrs, text);
}

Checkpoint StageModel::to_checkpoint() const {
  Checkpoint ck;
  ck.manifest = metadata;
  ck.manifest["stage"] = std::string(stage_name(kind()));
  ck.manifest["arch"] = {{"resolution", arch().resolution},
                         {"gen_width", arch().gen_width},
                         {"disc_width", arch().disc_width}};
  ck.manifest["vocabulary"] = vocab_.tokens();
  auto& nets = const_cast<StageNetworks<float>&>(*nets_);
  store_parameters(ck, nets.all_parameters());
  return ck;
}

StageModel StageModel::from_checkpoint(const Checkpoint& ck, std::optional<StageKind> expected) {
  StageKind kind;
  ArchConfig arch;
  std::vector<std::string> tokens;
  try {
    kind = parse_stage(ck.manifest.at("stage").get<std::string>());
    const auto& a = ck.manifest.at("arch");
    arch = {a.at("resolution").get<int>(), a.at("gen_width").get<int>(), a.at("disc_width").get<int>()};
    tokens = ck.manifest.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("checkpoint manifest incomplete: ") + e.what());
  }
  if (expected && *expected != kind) {
    throw Error(ErrorCode::StageMismatch, "checkpoint holds stage '" + std::string(stage_name(kind)) +
                                              "', expected '" + std::string(stage_name(*expected)) + "'");
  }
  StageModel model(kind, arch, Vocabulary::from_tokens(tokens), 0);
  restore_parameters(ck, model.networks().all_parameters());
  model.metadata = ck.manifest;
  model.metadata.erase("vocabulary");
  return model;
}

StageModel load_stage_model(const std::filesystem::path& path, std::optional<StageKind> expected) {
  return StageModel::from_checkpoint(load_checkpoint(path), expected);
}

// ---------------------------------------------------------------- batches

namespace {

// Per-record arrays in the layout of one stage.
struct Prepared {
  Grid3f cond;   // generator condition
  Grid3f dcond;  // discriminator condition (upsampled when smaller)
  Grid3f real;   // real sample: S0 for stage one, the photo otherwise
  Grid3f mask;   // S0, used for composition in stage two
  std::array<float, kAttributeDim> attrs{};
  TokenSequence tokens;
};

Prepared prepare(StageKind kind, const PersonRecord& r, const Vocabulary& vocab, int resolution) {
  if (r.image.height() != resolution || r.image.width() != resolution) {
    throw Error(ErrorCode::ShapeMismatch, "record " + r.id + " is " + std::to_string(r.image.height()) + "x" +
                                              std::to_string(r.image.width()) + ", training resolution is " +
                                              std::to_string(resolution));
  }
  Prepared p;
  p.attrs = extract_attributes(r);
  p.tokens = tokenize(r.caption, vocab);
  const Grid3f& s0 = r.segmap.probs();
  switch (kind) {
    case StageKind::kShape:
      p.cond = build_spatial_constraint(r.segmap).probs();
      p.dcond = p.cond;
      p.real = s0;
      break;
    case StageKind::kImage:
      p.cond = s0;
      p.dcond = s0;
      p.real = r.image.pixels();
      p.mask = s0;
      break;
    case StageKind::kNonComp:
      p.cond = s0;
      p.dcond = s0;
      p.real = r.image.pixels();
      break;
    case StageKind::kOneStep87:
      p.cond = downsampled_prior(r.segmap);
      p.dcond = p.cond;
      p.real = r.image.pixels();
      break;
    case StageKind::kOneStep84:
      p.cond = build_spatial_constraint(r.segmap).probs();
      p.dcond = p.cond;
      p.real = r.image.pixels();
      break;
  }
  return p;
}

struct Batch {
  nn::Tensor<float> z, attrs, cond, dcond, real, mask;
  std::vector<TokenSequence> tokens;
};

nn::Tensor<float> stack(const std::vector<Prepared>& data, std::span<const int> idx, Grid3f Prepared::*field) {
  const Grid3f& first = data[idx[0]].*field;
  nn::Tensor<float> t(first.channels(), static_cast<int>(idx.size()), first.height(), first.width());
  for (std::size_t n = 0; n < idx.size(); ++n) write_sample(t, static_cast<int>(n), data[idx[n]].*field);
  return t;
}

Batch make_batch(StageKind kind, const std::vector<Prepared>& data, std::span<const int> idx, Rng& rng) {
  Batch b;
  const int n = static_cast<int>(idx.size());
  b.z = nn::Tensor<float>(kNoiseDim, n);
  std::normal_distribution<float> normal;
  for (auto& v : b.z.values()) v = normal(rng);
  b.attrs = nn::Tensor<float>(kAttributeDim, n);
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < kAttributeDim; ++a) b.attrs.at(a, j, 0, 0) = data[idx[j]].attrs[a];
  b.cond = stack(data, idx, &Prepared::cond);
  b.dcond = stack(data, idx, &Prepared::dcond);
  b.real = stack(data, idx, &Prepared::real);
  if (kind == StageKind::kImage) b.mask = stack(data, idx, &Prepared::mask);
  for (int i : idx) b.tokens.push_back(data[i].tokens);
  return b;
}

// Generator output -> the sample the discriminator judges.
nn::Tensor<float> to_sample(StageKind kind, const nn::Tensor<float>& out, const Batch& b) {
  return kind == StageKind::kImage ? compose_tensor(out, b.mask) : out;
}

bool output_invariants_hold(StageKind kind, const nn::Tensor<float>& out) {
  for (float v : out.values()) {
    if (!std::isfinite(v)) return false;
  }
  if (kind == StageKind::kShape) {
    const std::size_t cs = out.channel_stride();
    for (std::size_t i = 0; i < cs; ++i) {
      double s = 0;
      for (int c = 0; c < out.channels(); ++c) {
        const float v = out[c * cs + i];
        if (v < 0) return false;
        s += v;
      }
      if (std::abs(s - 1.0) > kSimplexTolerance) return false;
    }
    return true;
  }
  return std::all_of(out.values().begin(), out.values().end(), [](float v) { return v >= -1 && v <= 1; });
}

nn::Tensor<float> with_noise(nn::Tensor<float> x, double sigma, Rng& rng) {
  if (sigma > 0) {
    std::normal_distribution<float> normal(0.0f, static_cast<float>(sigma));
    for (auto& v : x.values()) v += normal(rng);
  }
  return x;
}

std::vector<double> probabilities(const nn::Tensor<float>& logits) {
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(static_cast<double>(logits[i]));
  return p;
}

// d/dlogit of -mean log sigmoid(l) (target 1) or -mean log(1 - sigmoid(l)).
nn::Tensor<float> logit_grad(const std::vector<double>& p, bool target_real) {
  nn::Tensor<float> g(1, static_cast<int>(p.size()), 1, 1);
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = static_cast<float>((target_real ? p[i] - 1.0 : p[i]) / n);
  return g;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::vector<int>> epoch_batches(int count, int batch_size, Rng& rng) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> out;
  for (int s = 0; s + 1 < count; s += batch_size) {
    const int e = std::min(count, s + batch_size);
    if (e - s >= 2) out.emplace_back(order.begin() + s, order.begin() + e);
  }
  return out;
}

void recalibrate_batch_norm(StageNetworks<float>& nets, const std::vector<Prepared>& data, int batch_size,
                            std::uint64_t seed) {
  Rng rng(seed);
  auto& g = nets.generator();
  auto& d = nets.discriminator();
  g.begin_bn_accumulation();
  d.begin_bn_accumulation();
  for (const auto& idx : epoch_batches(static_cast<int>(data.size()), batch_size, rng)) {
    Batch b = make_batch(nets.kind(), data, idx, rng);
    const auto v = nets.text().infer(b.tokens);
    const auto dvec = nn::concat_channels(b.attrs, v);
    const auto fake = to_sample(nets.kind(), g.forward(b.z, dvec, b.cond, true), b);
    d.forward(with_upsampled_condition(b.real, b.dcond), dvec, true);
    d.forward(with_upsampled_condition(fake, b.dcond), dvec, true);
  }
  g.end_bn_accumulation();
  d.end_bn_accumulation();
}

void write_checkpoint(const StageModel& model, const TrainConfig& cfg, const std::vector<EpochSummary>& history,
                      nn::Adam<float>& adam_g, nn::Adam<float>& adam_d, const std::filesystem::path& path) {
  Checkpoint ck = model.to_checkpoint();
  ck.manifest["epoch"] = history.empty() ? 0 : history.back().epoch;
  ck.manifest["config_hash"] = cfg.hash();
  ck.manifest["config"] = cfg.canonical();
  auto& hist = ck.manifest["loss_history"] = nlohmann::json::array();
  for (const auto& e : history) {
    hist.push_back({{"epoch", e.epoch}, {"loss_d", e.loss_d}, {"loss_g", e.loss_g}, {"d_real", e.d_real},
                    {"d_fake", e.d_fake}});
  }
  ck.manifest["adam_steps"] = {{"generator", adam_g.steps()}, {"discriminator", adam_d.steps()}};
  auto sg = adam_g.state();
  auto sd = adam_d.state();
  nn::ParameterList<float> state;
  for (auto& p : sg) state.push_back({"adam." + p.name, p.param});
  for (auto& p : sd) state.push_back({"adam." + p.name, p.param});
  store_parameters(ck, state);
  save_checkpoint(ck, path);
}

}  // namespace

// ---------------------------------------------------------------- training

TrainResult train_stage(const TrainConfig& config, std::span<const PersonRecord> dataset, TrainHooks hooks) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::DatasetEmpty, "no training records");
  Vocabulary vocab;
  if (hooks.vocabulary) {
    vocab = *hooks.vocabulary;
  } else {
    std::vector<std::string> captions;
    for (const auto& r : dataset) captions.push_back(r.caption);
    vocab = Vocabulary::build(captions);
  }
  std::vector<Prepared> data;
  data.reserve(dataset.size());
  for (const auto& r : dataset) data.push_back(prepare(config.stage, r, vocab, config.resolution));

  TrainResult result{StageModel(config.stage, config.arch(), vocab, derive_seed(config.seed, 0)), {}, {}, 0, 0};
  auto& nets = result.model.networks();
  auto& gen = nets.generator();
  auto& disc = nets.discriminator();
  auto& text = nets.text();
  const nn::AdamConfig adam_cfg{config.learning_rate, config.beta1, config.beta2, 1e-8};
  nn::Adam<float> adam_g(nets.generator_parameters(), adam_cfg);
  auto d_params = nets.discriminator_parameters();
  for (auto& p : nets.text_parameters()) d_params.push_back(p);
  nn::Adam<float> adam_d(d_params, adam_cfg);
  const StageKind kind = config.stage;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    EpochSummary summary;
    summary.epoch = epoch;
    std::vector<double> ld, lg, pr, pf;
    const auto batches = epoch_batches(static_cast<int>(data.size()), config.batch_size, rng);
    int step = 0;
    for (const auto& idx : batches) {
      Batch b = make_batch(kind, data, idx, rng);
      const int n = static_cast<int>(idx.size());
      std::vector<TokenSequence> all_tokens = b.tokens;
      if (config.mismatch_pairs) {
        for (int j = 0; j < n; ++j) all_tokens.push_back(b.tokens[(j + 1) % n]);
      }
      const auto v_all = text.forward(all_tokens);
      const auto dvec = nn::concat_channels(b.attrs, nn::slice_batch(v_all, 0, n));
      const auto out = gen.forward(b.z, dvec, b.cond, true);
      const auto fake = to_sample(kind, out, b);
      const auto real_in = with_upsampled_condition(with_noise(b.real, config.instance_noise, rng), b.dcond);
      const auto fake_in = with_upsampled_condition(with_noise(fake, config.instance_noise, rng), b.dcond);

      // Discriminator (and text encoder) update.
      adam_d.zero_grad();
      const auto p_real = probabilities(disc.forward(real_in, dvec, true));
      auto gr = disc.backward(logit_grad(p_real, true));
      const auto p_fake = probabilities(disc.forward(fake_in, dvec, true));
      const float fake_share = config.mismatch_pairs ? 0.5f : 1.0f;
      auto gf_logit = logit_grad(p_fake, false);
      gf_logit *= fake_share;
      auto gf = disc.backward(gf_logit);
      gr.d += gf.d;
      auto g_text = nn::slice_channels(gr.d, kAttributeDim, kTextDim);
      if (config.mismatch_pairs) {
        const auto d_wrong = nn::concat_channels(b.attrs, nn::slice_batch(v_all, n, n));
        const auto p_wrong = probabilities(disc.forward(real_in, d_wrong, true));
        auto gw_logit = logit_grad(p_wrong, false);
        gw_logit *= 0.5f;
        const auto gw = disc.backward(gw_logit);
        g_text = nn::concat_batch(g_text, nn::slice_channels(gw.d, kAttributeDim, kTextDim));
      }
      text.backward(g_text);
      adam_d.step();
      ++result.discriminator_updates;

      // Generator update against the refreshed discriminator.
      adam_g.zero_grad();
      const auto p_gen = probabilities(disc.forward(fake_in, dvec, true));
      const auto gx = disc.backward(logit_grad(p_gen, true)).x;
      auto g_fake = nn::slice_channels(gx, 0, fake.channels());
      gen.backward(kind == StageKind::kImage ? compose_tensor_backward(g_fake, b.mask) : g_fake);
      adam_g.step();
      ++result.generator_updates;

      const double loss_d = gan_losses(p_real, p_fake).loss_d;
      const double loss_g = gan_losses(p_real, p_gen).loss_g;
      if (!std::isfinite(loss_d) || !std::isfinite(loss_g)) {
        throw Error(ErrorCode::NonFiniteLoss, "stage " + std::string(stage_name(kind)) + " epoch " +
                                                  std::to_string(epoch) + " step " + std::to_string(step) +
                                                  ": loss_D=" + std::to_string(loss_d) +
                                                  " loss_G=" + std::to_string(loss_g));
      }
      result.trace.push_back({epoch, step, loss_d, loss_g});
      ld.push_back(loss_d);
      lg.push_back(loss_g);
      pr.push_back(mean(p_real));
      pf.push_back(mean(p_fake));
      if (step + 1 == static_cast<int>(batches.size())) summary.invariants_ok = output_invariants_hold(kind, out);
      ++step;
    }
    summary.loss_d = mean(ld);
    summary.loss_g = mean(lg);
    summary.d_real = mean(pr);
    summary.d_fake = mean(pf);
    result.epochs.push_back(summary);

    const bool last = epoch == config.epochs;
    const bool stop = hooks.on_epoch && !hooks.on_epoch(summary);
    if (last || stop) {
      recalibrate_batch_norm(nets, data, config.batch_size, derive_seed(config.seed, 999));
    }
    if (!config.checkpoint_dir.empty()) {
      const std::string name(stage_name(kind));
      write_checkpoint(result.model, config, result.epochs, adam_g, adam_d,
                       config.checkpoint_dir / (name + "_epoch_" + std::to_string(epoch) + ".fgck"));
      if (last || stop) {
        write_checkpoint(result.model, config, result.epochs, adam_g, adam_d, config.checkpoint_dir / (name + ".fgck"));
      }
    }
    if (stop) break;
  }
  result.model.metadata["epoch"] = result.epochs.empty() ? 0 : result.epochs.back().epoch;
  result.model.metadata["config_hash"] = config.hash();
  return result;
}

double discriminator_accuracy(const StageModel& model, std::span<const PersonRecord> records, std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorCode::DatasetEmpty, "no records to evaluate");
  const auto& nets = model.networks();
  std::vector<Prepared> data;
  for (const auto& r : records) data.push_back(prepare(model.kind(), r, model.vocabulary(), model.arch().resolution));
  Rng rng(seed);
  long correct = 0, total = 0;
  const int bs = 32;
  for (int s = 0; s < static_cast<int>(data.size()); s += bs) {
    std::vector<int> idx(std::min<int>(bs, static_cast<int>(data.size()) - s));
    std::iota(idx.begin(), idx.end(), s);
    Batch b = make_batch(model.kind(), data, idx, rng);
    const auto dvec = nn::concat_channels(b.attrs, nets.text().infer(b.tokens));
    const auto fake = to_sample(model.kind(), nets.generator().infer(b.z, dvec, b.cond), b);
    const auto pr = probabilities(nets.discriminator().infer(with_upsampled_condition(b.real, b.dcond), dvec));
    const auto pf = probabilities(nets.discriminator().infer(with_upsampled_condition(fake, b.dcond), dvec));
    for (double p : pr) correct += p > 0.5;
    for (double p : pf) correct += p < 0.5;
    total += static_cast<long>(pr.size() + pf.size());
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------- inference

PipelineOutput run_pipeline(const PersonRecord& person, const StageInputs& shape_in, const StageInputs& image_in,
                            const StageModel& shape, const StageModel& image) {
  if (shape.kind() != StageKind::kShape) throw Error(ErrorCode::StageMismatch, "first model is not a shape stage");
  if (image.kind() != StageKind::kImage && image.kind() != StageKind::kNonComp) {
    throw Error(ErrorCode::StageMismatch, "second model is not an image stage");
  }
  const auto attrs = extract_attributes(person);
  const SpatialConstraint constraint = build_spatial_constraint(person);
  PipelineOutput out;
  out.shape_map = generate_shape(shape_in.z, constraint, DesignCoding::concat(attrs, shape_in.text),
                                 shape.networks().generator());
  const SegMap masks = segmap_from_labels(argmax_labels(out.shape_map));
  const DesignCoding d_image = DesignCoding::concat(attrs, image_in.text);
  ImageRGB generated;
  if (image.kind() == StageKind::kImage) {
    const auto channels = generate_texture_channels(image_in.z, masks, d_image, image.networks().generator());
    generated = compose(channels, masks, ComposeMode::kHard);
  } else {
    generated = noncomp_generate(image_in.z, masks, d_image, image.networks().generator());
  }
  out.image = replace_head(generated, person.image, person.segmap);
  return out;
}

PipelineOutput infer_pipeline(const PersonRecord& person, std::string_view caption, const PipelineSeeds& seeds,
                              const StageModel& shape, const StageModel& image) {
  StageInputs s{LatentNoise::sample(seeds.shape), shape.encode_caption(caption)};
  StageInputs i{LatentNoise::sample(seeds.image), image.encode_caption(caption)};
  return run_pipeline(person, s, i, shape, image);
}

ImageRGB infer_one_step(const PersonRecord& person, std::string_view caption, std::uint64_t seed,
                        const StageModel& model) {
  OneStepVariant variant;
  Grid3f prior;
  if (model.kind() == StageKind::kOneStep87) {
    variant = OneStepVariant::k87;
    prior = downsampled_prior(person.segmap);
  } else if (model.kind() == StageKind::kOneStep84) {
    variant = OneStepVariant::k84;
    prior = build_spatial_constraint(person).probs();
  } else {
    throw Error(ErrorCode::StageMismatch, "model is not a one-step baseline");
  }
  const ImageRGB generated = one_step_generate(LatentNoise::sample(seed), prior, model.design_coding(person, caption),
                                               model.networks().generator(), variant);
  return replace_head(generated, person.image, person.segmap);
}

}  // namespace fashion
