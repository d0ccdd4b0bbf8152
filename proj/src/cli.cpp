#include "fashion/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "fashion/error.hpp"
#include "fashion/evaluation.hpp"
#include "fashion/png_io.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/rng.hpp"
#include "fashion/service.hpp"
#include "fashion/synth_data.hpp"
#include "fashion/training.hpp"

namespace fashion {

std::filesystem::path fashion_home() {
  const char* env = std::getenv("FASHION_SYNTH_HOME");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("fashion_home");
}

namespace {

std::filesystem::path default_data() { return fashion_home() / "data"; }
std::filesystem::path default_checkpoints() { return fashion_home() / "checkpoints"; }

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Fixed-size tiles upscaled by nearest neighbour; unused cells stay white.
class Canvas {
 public:
  Canvas(int rows, int cols, int tile, int scale)
      : rows_(rows), cols_(cols), tile_(tile), scale_(scale), rgb_(static_cast<std::size_t>(height()) * width() * 3, 255) {}

  int height() const { return rows_ * tile_ * scale_; }
  int width() const { return cols_ * tile_ * scale_; }

  void put(int row, int col, const std::vector<std::uint8_t>& rgb) {
    const int s = tile_ * scale_;
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const std::size_t src = (static_cast<std::size_t>(y / scale_) * tile_ + x / scale_) * 3;
        const std::size_t dst = (static_cast<std::size_t>(row * s + y) * width() + col * s + x) * 3;
        for (int k = 0; k < 3; ++k) rgb_[dst + k] = rgb[src + k];
      }
    }
  }
  void put(int row, int col, const ImageRGB& image) { put(row, col, image.to_bytes()); }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file(path, encode_png_rgb({height(), width(), rgb_}));
  }

 private:
  int rows_, cols_, tile_, scale_;
  std::vector<std::uint8_t> rgb_;
};

std::vector<std::uint8_t> colorize(const LabelGrid& labels) {
  const auto& pal = label_palette();
  std::vector<std::uint8_t> out(labels.labels.size() * 3);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    for (int k = 0; k < 3; ++k) out[i * 3 + k] = pal[labels.labels[i]][k];
  }
  return out;
}

std::vector<std::uint8_t> colorize(const SegMap& map) { return colorize(argmax_labels(map)); }

// Merged 8x8 constraint shown at full size; "rest" in grey.
std::vector<std::uint8_t> colorize_constraint(const PersonRecord& person) {
  const LabelGrid merged = argmax_labels(upsample_nearest(build_spatial_constraint(person).probs(), person.image.height()));
  const auto& pal = label_palette();
  std::vector<std::uint8_t> out(merged.labels.size() * 3);
  for (std::size_t i = 0; i < merged.labels.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      out[i * 3 + k] = merged.labels[i] == kMergedRest ? std::uint8_t{128} : pal[merged.labels[i]][k];
    }
  }
  return out;
}

PipelineSeeds pipeline_seeds(std::uint64_t seed) { return {derive_seed(seed, 0), derive_seed(seed, 1)}; }

struct Models {
  std::optional<StageModel> shape, image;
};

Models load_pipeline(const std::filesystem::path& dir, const std::string& second = "image") {
  Models m;
  m.shape.emplace(load_stage_model(dir / "shape.fgck", StageKind::kShape));
  m.image.emplace(load_stage_model(dir / (second + ".fgck"), parse_stage(second)));
  return m;
}

std::vector<PersonRecord> load_records(const std::filesystem::path& dir, std::size_t needed) {
  auto records = load_dataset(dir);
  if (records.size() < needed) {
    throw Error(ErrorCode::InvalidArgument, dir.string() + " holds " + std::to_string(records.size()) +
                                                " records, " + std::to_string(needed) + " needed");
  }
  return records;
}

// ---------------------------------------------------------------- subcommands

struct SynthOptions {
  int count = 0;
  std::uint64_t seed = 1;
  std::string out;
  int resolution = 32;
};

int run_synth(const SynthOptions& o, std::ostream& out) {
  const std::filesystem::path dir = o.out.empty() ? default_data() : std::filesystem::path(o.out);
  const auto records = generate_dataset(o.count, o.seed, dir, o.resolution);
  out << "wrote " << records.size() << " records to " << dir.string() << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string stage, config, data, checkpoints;
  std::vector<std::string> sets;
  CLI::Option *epochs_opt = nullptr, *seed_opt = nullptr, *batch_opt = nullptr, *lr_opt = nullptr;
  int epochs = 0;
  std::uint64_t seed = 0;
  int batch = 0;
  double lr = 0;
  int detector_width = 16;
};

int run_train(const TrainOptions& o, std::ostream& out) {
  TrainConfig cfg;
  const bool detector = o.stage == "detector";
  std::string text = o.config.empty() ? std::string() : read_text(o.config);
  if (detector) {
    // The detector has no stage; drop a stage line from a shared config file.
    std::istringstream in(text);
    std::string line, kept;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      std::string key = eq == std::string::npos ? "" : line.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      if (key != "stage") kept += line + "\n";
    }
    text = kept;
  }
  cfg = TrainConfig::parse(text);
  if (!o.stage.empty() && !detector) cfg.stage = parse_stage(o.stage);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.epochs_opt->count()) cfg.epochs = o.epochs;
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (o.batch_opt->count()) cfg.batch_size = o.batch;
  if (o.lr_opt->count()) cfg.learning_rate = o.lr;
  if (!o.data.empty()) cfg.dataset = o.data;
  if (!o.checkpoints.empty()) cfg.checkpoint_dir = o.checkpoints;
  if (cfg.dataset.empty()) cfg.dataset = default_data();
  if (cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = default_checkpoints();
  cfg.validate();

  const auto records = load_dataset(cfg.dataset);
  std::filesystem::create_directories(cfg.checkpoint_dir);
  if (detector) {
    AttributeDetector det(cfg.resolution, derive_seed(cfg.seed, 0), o.detector_width);
    const auto report = det.fit(records, cfg.epochs, cfg.batch_size, cfg.seed);
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
      out << "detector epoch " << e + 1 << "/" << cfg.epochs << " loss=" << report.epoch_loss[e] << "\n";
    }
    out << "detector train accuracy " << report.train_accuracy << "\n";
    save_checkpoint(det.to_checkpoint(), cfg.checkpoint_dir / "detector.fgck");
    out << "wrote " << (cfg.checkpoint_dir / "detector.fgck").string() << "\n";
    return kExitOk;
  }
  TrainHooks hooks;
  const std::string name(stage_name(cfg.stage));
  hooks.on_epoch = [&](const EpochSummary& e) {
    out << name << " epoch " << e.epoch << "/" << cfg.epochs << " loss_D=" << e.loss_d << " loss_G=" << e.loss_g
        << " D(real)=" << e.d_real << " D(fake)=" << e.d_fake << (e.invariants_ok ? "" : " INVARIANT VIOLATION")
        << std::endl;
    return true;
  };
  train_stage(cfg, records, hooks);
  out << "wrote " << (cfg.checkpoint_dir / (name + ".fgck")).string() << "\n";
  return kExitOk;
}

struct PersonOptions {
  std::string image, segmap, gender;
  bool long_hair = false, sunglasses = false, hat = false;
};

PersonRecord person_from_files(const PersonOptions& o, const std::string& caption) {
  std::optional<PersonAttributes> attrs;
  if (!o.gender.empty() || o.long_hair || o.sunglasses || o.hat) {
    PersonAttributes a;
    if (o.gender.empty()) {
      if (const auto parsed = parse_doll_caption(caption)) a.gender = parsed->female;
    } else {
      a.gender = o.gender == "female";
    }
    a.long_hair = o.long_hair;
    a.sunglasses = o.sunglasses;
    a.hat = o.hat;
    attrs = a;
  }
  return make_person(load_image(o.image), load_segmap(o.segmap), caption, attrs);
}

struct InferOptions {
  PersonOptions person;
  std::string caption, out, checkpoints, model = "fashiongan";
  std::uint64_t seed = 0;
};

int run_infer(const InferOptions& o, std::ostream& out) {
  const std::filesystem::path ck = o.checkpoints.empty() ? default_checkpoints() : std::filesystem::path(o.checkpoints);
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  const PersonRecord person = person_from_files(o.person, o.caption);
  nlohmann::ordered_json report = {{"model", o.model}, {"caption", o.caption}, {"seed", o.seed}};
  if (o.model == "fashiongan" || o.model == "non-comp") {
    const Models m = load_pipeline(ck, o.model == "fashiongan" ? "image" : "non-comp");
    const auto res = infer_pipeline(person, o.caption, pipeline_seeds(o.seed), *m.shape, *m.image);
    write_file(dir / "shape_map.png", segmap_png(res.shape_map));
    write_file(dir / "image.png", image_png(res.image));
    report["shape_map"] = (dir / "shape_map.png").string();
    report["image"] = (dir / "image.png").string();
  } else {
    const StageModel model = load_stage_model(ck / (o.model + ".fgck"), parse_stage(o.model));
    write_file(dir / "image.png", image_png(infer_one_step(person, o.caption, o.seed, model)));
    report["image"] = (dir / "image.png").string();
  }
  out << report.dump() << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string protocol, data, checkpoints, detector, out, ratings;
  std::uint64_t seed = 0;
  int limit = 0;
};

int run_eval(const EvalOptions& o, std::ostream& out) {
  if (o.protocol == "rank") {
    if (o.ratings.empty()) throw CLI::RequiredError("--ratings");
    const auto stats = ranking_stats(read_ratings_csv(read_text(o.ratings)));
    nlohmann::ordered_json j = {{"items", stats.items}, {"methods", nlohmann::json::array()}};
    for (std::size_t m = 0; m < stats.methods.size(); ++m) {
      j["methods"].push_back({{"method", stats.methods[m]},
                              {"mean", stats.mean[m]},
                              {"std", stats.stddev[m]},
                              {"frequency", stats.frequency[m]}});
    }
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  const std::filesystem::path ck = o.checkpoints.empty() ? default_checkpoints() : std::filesystem::path(o.checkpoints);
  auto test = load_records(o.data.empty() ? default_data() : std::filesystem::path(o.data), 2);
  if (o.limit > 0 && static_cast<std::size_t>(o.limit) < test.size()) test.resize(o.limit);
  const AttributeDetector detector =
      AttributeDetector::from_checkpoint(load_checkpoint(o.detector.empty() ? ck / "detector.fgck" : std::filesystem::path(o.detector)));
  std::vector<SwapProtocolResult> rows;
  rows.push_back(run_swap_upper_bound(test, detector, o.seed));
  const Models m = load_pipeline(ck);
  rows.push_back(run_swap_protocol("FashionGAN", pipeline_redress(*m.shape, *m.image), test, detector, o.seed));
  if (std::filesystem::exists(ck / "non-comp.fgck")) {
    const StageModel nc = load_stage_model(ck / "non-comp.fgck", StageKind::kNonComp);
    rows.push_back(run_swap_protocol("Non-Compositional", pipeline_redress(*m.shape, nc), test, detector, o.seed));
  }
  for (const char* name : {"one-step-8-7", "one-step-8-4"}) {
    if (!std::filesystem::exists(ck / (std::string(name) + ".fgck"))) continue;
    const StageModel one = load_stage_model(ck / (std::string(name) + ".fgck"), parse_stage(name));
    const std::string label = name == std::string("one-step-8-7") ? "One-Step-8-7" : "One-Step-8-4";
    rows.push_back(run_swap_protocol(label, one_step_redress(one), test, detector, o.seed));
  }
  rows.push_back(run_swap_constant(test, o.seed));
  const std::string json = swap_report_json(rows).dump(2) + "\n";
  if (!o.out.empty()) {
    write_text(o.out, json);
    out << swap_report_table(rows);
  } else {
    out << json;
  }
  return kExitOk;
}

struct GridOptions {
  std::string mode, data, checkpoints, out;
  std::uint64_t seed = 0;
  int count = 4, index = 0, scale = 4;
};

int run_grid(const GridOptions& o, std::ostream& out) {
  const std::filesystem::path ck = o.checkpoints.empty() ? default_checkpoints() : std::filesystem::path(o.checkpoints);
  const int n = o.count;
  const auto records = load_records(o.data.empty() ? default_data() : std::filesystem::path(o.data),
                                    static_cast<std::size_t>(o.index + 2 * n));
  const Models m = load_pipeline(ck);
  const int tile = records[0].image.height();
  nlohmann::ordered_json side = {{"mode", o.mode}, {"seed", o.seed}};
  if (o.mode == "matrix") {
    // Wearers down the left column, caption donors along the top row.
    Canvas canvas(n + 1, n + 1, tile, o.scale);
    for (int j = 0; j < n; ++j) {
      const auto& donor = records[o.index + n + j];
      canvas.put(0, j + 1, donor.image);
      side["captions"].push_back(donor.caption);
    }
    for (int i = 0; i < n; ++i) {
      const auto& wearer = records[o.index + i];
      canvas.put(i + 1, 0, wearer.image);
      side["wearers"].push_back(wearer.id);
      for (int j = 0; j < n; ++j) {
        const auto res = infer_pipeline(wearer, records[o.index + n + j].caption,
                                        pipeline_seeds(derive_seed(o.seed, i * n + j)), *m.shape, *m.image);
        canvas.put(i + 1, j + 1, res.image);
      }
    }
    canvas.save(o.out);
  } else {
    // Rows: inputs, S~, final images.
    Canvas canvas(3, n, tile, o.scale);
    const bool wearer_fixed = o.mode == "same-wearer";
    const auto& fixed = records[o.index];
    if (wearer_fixed) {
      canvas.put(0, 0, fixed.image);
      canvas.put(0, 1, colorize_constraint(fixed));
      side["wearer"] = fixed.id;
    } else {
      side["caption"] = fixed.caption;
    }
    for (int j = 0; j < n; ++j) {
      const auto& other = records[o.index + 1 + j];
      const PersonRecord& wearer = wearer_fixed ? fixed : other;
      const std::string& caption = wearer_fixed ? other.caption : fixed.caption;
      if (!wearer_fixed) canvas.put(0, j, wearer.image);
      const auto res = infer_pipeline(wearer, caption, pipeline_seeds(derive_seed(o.seed, j)), *m.shape, *m.image);
      canvas.put(1, j, colorize(res.shape_map));
      canvas.put(2, j, res.image);
      side[wearer_fixed ? "captions" : "wearers"].push_back(wearer_fixed ? caption : wearer.id);
    }
    canvas.save(o.out);
  }
  write_text(o.out + ".json", side.dump(2) + "\n");
  out << "wrote " << o.out << "\n";
  return kExitOk;
}

struct InterpOptions {
  std::string mode, data, checkpoints, out, caption_a, caption_b;
  PersonOptions person;
  int index = -1, steps = 5, scale = 4;
  std::uint64_t seed_a = 0, seed_b = 1;
};

int run_interpolate(const InterpOptions& o, std::ostream& out) {
  const std::filesystem::path ck = o.checkpoints.empty() ? default_checkpoints() : std::filesystem::path(o.checkpoints);
  PersonRecord person;
  if (o.index >= 0) {
    const auto records = load_records(o.data.empty() ? default_data() : std::filesystem::path(o.data),
                                      static_cast<std::size_t>(o.index + 1));
    person = records[o.index];
  } else if (!o.person.image.empty() && !o.person.segmap.empty()) {
    person = person_from_files(o.person, o.caption_a);
  } else {
    throw CLI::ValidationError("person", "give --index or both --image and --segmap");
  }
  const Models m = load_pipeline(ck);
  const auto frames = interpolation_walk(person, {o.caption_a, pipeline_seeds(o.seed_a)},
                                         {o.caption_b, pipeline_seeds(o.seed_b)}, parse_interpolation_mode(o.mode),
                                         o.steps, *m.shape, *m.image);
  Canvas canvas(2, o.steps, person.image.height(), o.scale);
  for (int k = 0; k < o.steps; ++k) {
    canvas.put(0, k, colorize(frames[k].shape_map));
    canvas.put(1, k, frames[k].image);
  }
  canvas.save(o.out);
  out << "wrote " << o.out << "\n";
  return kExitOk;
}

struct ServeOptions {
  std::string host = "127.0.0.1", checkpoints, store;
  int port = 8080;
};

int run_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  const std::filesystem::path ck = o.checkpoints.empty() ? default_checkpoints() : std::filesystem::path(o.checkpoints);
  std::string why;
  auto models = Service::load_models(ck, &why);
  if (!models) err << "warning: checkpoints not loaded (" << why << "); generate/interpolate answer 503\n";
  Service service(std::move(models), o.store.empty() ? fashion_home() / "sessions.jsonl" : std::filesystem::path(o.store));
  out << "listening on http://" << o.host << ":" << o.port << std::endl;
  service.serve(o.host, o.port);
  return kExitOk;
}

void add_person_flags(CLI::App* cmd, PersonOptions& p) {
  cmd->add_option("--gender", p.gender, "female | male (default: from the caption)")
      ->check(CLI::IsMember({"female", "male"}));
  cmd->add_flag("--long-hair", p.long_hair, "person has long hair");
  cmd->add_flag("--sunglasses", p.sunglasses, "person wears sunglasses");
  cmd->add_flag("--hat", p.hat, "person wears a hat");
}

std::string config_keys_help() {
  std::string s = "\nConfig file keys (flat key=value; flags override the file):\n";
  for (const auto& [k, v] : TrainConfig::documented_keys()) s += "  " + k + std::string(16 - std::min<std::size_t>(15, k.size()), ' ') + v + "\n";
  return s;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage text-guided redressing: data, training, inference, evaluation and service"};
  app.name("fashion");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 runtime error, 2 usage error.\nFASHION_SYNTH_HOME sets the default data/checkpoint root (" +
             fashion_home().string() + ").");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth-data", "render a synthetic paper-doll dataset");
  c_synth->add_option("--count", synth.count, "number of records")->required()->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed, "dataset seed");
  c_synth->add_option("--out", synth.out, "output directory (default <home>/data)");
  c_synth->add_option("--resolution", synth.resolution, "32, 64 or 128")->check(CLI::IsMember({32, 64, 128}));

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "train one stage (or the attribute detector)");
  c_train->add_option("--stage", train.stage, "shape | image | one-step-8-7 | one-step-8-4 | non-comp | detector")
      ->check(CLI::IsMember({"shape", "image", "one-step-8-7", "one-step-8-4", "non-comp", "detector"}));
  c_train->add_option("--config", train.config, "key=value config file")->check(CLI::ExistingFile);
  train.epochs_opt = c_train->add_option("--epochs", train.epochs, "override epochs");
  train.seed_opt = c_train->add_option("--seed", train.seed, "override seed");
  train.batch_opt = c_train->add_option("--batch-size", train.batch, "override batch_size");
  train.lr_opt = c_train->add_option("--learning-rate", train.lr, "override learning_rate");
  c_train->add_option("--data", train.data, "dataset directory (default <home>/data)");
  c_train->add_option("--checkpoints", train.checkpoints, "checkpoint directory (default <home>/checkpoints)");
  c_train->add_option("--set", train.sets, "extra key=value overrides");
  c_train->footer(config_keys_help());

  InferOptions infer;
  auto* c_infer = app.add_subcommand("infer", "redress one photo with a caption");
  c_infer->add_option("--image", infer.person.image, "input photo PNG")->required()->check(CLI::ExistingFile);
  c_infer->add_option("--segmap", infer.person.segmap, "palette segmentation PNG")->required();
  c_infer->add_option("--caption", infer.caption, "outfit description")->required();
  c_infer->add_option("--seed", infer.seed, "generation seed");
  c_infer->add_option("--out", infer.out, "output directory")->required();
  c_infer->add_option("--checkpoints", infer.checkpoints, "checkpoint directory");
  c_infer->add_option("--model", infer.model, "fashiongan | non-comp | one-step-8-7 | one-step-8-4")
      ->check(CLI::IsMember({"fashiongan", "non-comp", "one-step-8-7", "one-step-8-4"}));
  add_person_flags(c_infer, infer.person);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "swap-protocol AP/mAP or ranking statistics");
  c_eval->add_option("--protocol", eval.protocol, "swap | rank")->required()->check(CLI::IsMember({"swap", "rank"}));
  c_eval->add_option("--data", eval.data, "test dataset directory (swap)");
  c_eval->add_option("--checkpoints", eval.checkpoints, "checkpoint directory (swap)");
  c_eval->add_option("--detector", eval.detector, "detector checkpoint (default <checkpoints>/detector.fgck)");
  c_eval->add_option("--seed", eval.seed, "pairing and generation seed");
  c_eval->add_option("--limit", eval.limit, "use only the first N test records");
  c_eval->add_option("--ratings", eval.ratings, "CSV item_id,method,rank (rank)");
  c_eval->add_option("--out", eval.out, "write the JSON report here");

  GridOptions grid;
  auto* c_grid = app.add_subcommand("grid", "emit image grids");
  c_grid->add_option("--mode", grid.mode, "matrix | same-wearer | same-text")
      ->required()
      ->check(CLI::IsMember({"matrix", "same-wearer", "same-text"}));
  c_grid->add_option("--data", grid.data, "dataset directory");
  c_grid->add_option("--checkpoints", grid.checkpoints, "checkpoint directory");
  c_grid->add_option("--seed", grid.seed, "generation seed");
  c_grid->add_option("--count", grid.count, "columns (and rows for matrix)")->check(CLI::Range(1, 32));
  c_grid->add_option("--index", grid.index, "first record used")->check(CLI::NonNegativeNumber);
  c_grid->add_option("--scale", grid.scale, "pixel upscaling")->check(CLI::Range(1, 16));
  c_grid->add_option("--out", grid.out, "output PNG")->required();

  InterpOptions interp;
  auto* c_interp = app.add_subcommand("interpolate", "walk the (noise, text) input space between two captions");
  c_interp->add_option("--mode", interp.mode, "shape | texture | both")
      ->required()
      ->check(CLI::IsMember({"shape", "texture", "both"}));
  c_interp->add_option("--caption-a", interp.caption_a, "first endpoint caption")->required();
  c_interp->add_option("--caption-b", interp.caption_b, "second endpoint caption")->required();
  c_interp->add_option("--seed-a", interp.seed_a, "first endpoint seed");
  c_interp->add_option("--seed-b", interp.seed_b, "second endpoint seed");
  c_interp->add_option("--steps", interp.steps, "frames including both endpoints")->check(CLI::Range(2, 64));
  c_interp->add_option("--data", interp.data, "dataset directory (with --index)");
  c_interp->add_option("--index", interp.index, "record index of the person")->check(CLI::NonNegativeNumber);
  c_interp->add_option("--image", interp.person.image, "input photo PNG");
  c_interp->add_option("--segmap", interp.person.segmap, "palette segmentation PNG");
  c_interp->add_option("--checkpoints", interp.checkpoints, "checkpoint directory");
  c_interp->add_option("--scale", interp.scale, "pixel upscaling")->check(CLI::Range(1, 16));
  c_interp->add_option("--out", interp.out, "output PNG")->required();
  add_person_flags(c_interp, interp.person);

  ServeOptions serve;
  auto* c_serve = app.add_subcommand("serve", "HTTP service for the design studio");
  c_serve->add_option("--host", serve.host, "bind address");
  c_serve->add_option("--port", serve.port, "port")->check(CLI::Range(1, 65535));
  c_serve->add_option("--checkpoints", serve.checkpoints, "directory with shape.fgck and image.fgck");
  c_serve->add_option("--store", serve.store, "session store file (default <home>/sessions.jsonl)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth, out);
    if (c_train->parsed()) {
      if (train.stage.empty() && train.config.empty()) {
        throw CLI::RequiredError("--stage (or a --config file with a stage key)");
      }
      return run_train(train, out);
    }
    if (c_infer->parsed()) return run_infer(infer, out);
    if (c_eval->parsed()) return run_eval(eval, out);
    if (c_grid->parsed()) return run_grid(grid, out);
    if (c_interp->parsed()) return run_interpolate(interp, out);
    if (c_serve->parsed()) return run_serve(serve, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidArgument && !c_train->parsed() ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fashion
