#include "fashion/service.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "httplib.h"
#include "fashion/checkpoint.hpp"
#include "fashion/error.hpp"
#include "fashion/evaluation.hpp"
#include "fashion/rng.hpp"
#include "fashion/synth_data.hpp"

namespace fashion {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string random_session_id() {
  std::random_device rd;
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return "s" + hex64(v);
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

HttpResult error_result(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// Field access that turns a missing or mistyped field into a 400.
struct BadRequest {
  std::string message;
  std::string field;
};

std::string required_string(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw BadRequest{std::string("missing field '") + field + "'", field};
  if (!j[field].is_string()) throw BadRequest{std::string("field '") + field + "' must be a string", field};
  return j[field].get<std::string>();
}

std::vector<std::uint8_t> decode_field(const std::string& text, const char* field) {
  try {
    return base64_decode(text);
  } catch (const Error& e) {
    throw BadRequest{std::string("field '") + field + "' is not valid base64", field};
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::Format, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw Error(ErrorCode::Format, "base64 padding in the middle");
        v[k] = b64_value(c);
        if (v[k] < 0) throw Error(ErrorCode::Format, "invalid base64 character");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(w & 0xFF));
  }
  return out;
}

// ---------------------------------------------------------------- store

nlohmann::json GenerationRecord::to_json() const {
  return {{"generation_id", generation_id}, {"session_id", session_id}, {"sequence", sequence},
          {"created_ms", created_ms},       {"caption", caption},       {"seed", seed},
          {"inputs_hash", inputs_hash},     {"image_png", image_png},   {"segmap_png", segmap_png},
          {"shape_map", shape_map},         {"output", output}};
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
  GenerationRecord r;
  r.generation_id = j.at("generation_id").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  r.sequence = j.at("sequence").get<std::uint64_t>();
  r.created_ms = j.at("created_ms").get<std::int64_t>();
  r.caption = j.at("caption").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.inputs_hash = j.at("inputs_hash").get<std::string>();
  r.image_png = j.at("image_png").get<std::string>();
  r.segmap_png = j.at("segmap_png").get<std::string>();
  r.shape_map = j.at("shape_map").get<std::string>();
  r.output = j.at("output").get<std::string>();
  return r;
}

SessionStore::SessionStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records_.push_back(GenerationRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      break;  // torn tail
    }
  }
}

GenerationRecord SessionStore::append(GenerationRecord record) {
  std::lock_guard lock(mu_);
  record.sequence = records_.empty() ? 1 : records_.back().sequence + 1;
  std::ostringstream id;
  id << "g" << std::setw(8) << std::setfill('0') << record.sequence;
  record.generation_id = id.str();
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot open session store " + path_.string());
  out << record.to_json().dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "cannot append to session store " + path_.string());
  records_.push_back(record);
  return record;
}

std::optional<GenerationRecord> SessionStore::find(std::string_view generation_id) const {
  std::lock_guard lock(mu_);
  for (const auto& r : records_) {
    if (r.generation_id == generation_id) return r;
  }
  return std::nullopt;
}

bool SessionStore::has_session(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  for (const auto& r : records_) {
    if (r.session_id == session_id) return true;
  }
  return false;
}

std::optional<std::vector<GenerationRecord>> SessionStore::session(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  std::vector<GenerationRecord> out;
  for (const auto& r : records_) {
    if (r.session_id == session_id) out.push_back(r);
  }
  if (out.empty()) return std::nullopt;
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.created_ms != b.created_ms ? a.created_ms < b.created_ms : a.generation_id < b.generation_id;
  });
  return out;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

// ---------------------------------------------------------------- handlers

struct Service::Server {
  httplib::Server http;
};

Service::Service(std::optional<LoadedModels> models, std::filesystem::path store_path)
    : models_(std::move(models)), store_(std::move(store_path)), server_(std::make_shared<Server>()) {}

std::optional<LoadedModels> Service::load_models(const std::filesystem::path& dir, std::string* why) {
  try {
    return LoadedModels{load_stage_model(dir / "shape.fgck", StageKind::kShape),
                        load_stage_model(dir / "image.fgck", StageKind::kImage)};
  } catch (const Error& e) {
    if (why) *why = e.what();
    return std::nullopt;
  }
}

HttpResult Service::generate(std::string_view body) {
  if (body.size() > kMaxPayloadBytes) return error_result(413, "payload larger than 8 MiB");
  if (!models_) return error_result(503, "checkpoints not loaded");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error_result(400, "body is not valid JSON");
  }
  if (!req.is_object()) return error_result(400, "body must be a JSON object");
  try {
    const std::string caption = required_string(req, "caption");
    const std::size_t len = utf8_length(caption);
    if (len < 1 || len > static_cast<std::size_t>(kMaxCaptionChars)) {
      throw BadRequest{"caption must have 1 to 200 characters", "caption"};
    }
    const auto image_bytes = decode_field(required_string(req, "image"), "image");
    const auto segmap_bytes = decode_field(required_string(req, "segmap"), "segmap");
    std::uint64_t seed;
    if (req.contains("seed") && !req["seed"].is_null()) {
      if (!req["seed"].is_number_unsigned()) throw BadRequest{"seed must be a non-negative integer", "seed"};
      seed = req["seed"].get<std::uint64_t>();
    } else {
      std::random_device rd;
      seed = rd() & 0x7FFFFFFFu;
    }
    std::string session_id;
    if (req.contains("session_id") && !req["session_id"].is_null()) {
      session_id = required_string(req, "session_id");
      if (session_id.empty()) throw BadRequest{"session_id must not be empty", "session_id"};
    } else {
      session_id = random_session_id();
    }

    PersonRecord person;
    try {
      person = make_person(image_from_png(image_bytes), segmap_from_png(segmap_bytes), caption);
    } catch (const Error& e) {
      const std::string field = e.code() == ErrorCode::PaletteViolation ? "segmap" : "image";
      throw BadRequest{e.what(), field};
    }
    if (person.image.height() != models_->shape.arch().resolution) {
      throw BadRequest{"image must be " + std::to_string(models_->shape.arch().resolution) + "x" +
                           std::to_string(models_->shape.arch().resolution),
                       "image"};
    }
    const auto out = infer_pipeline(person, caption, {derive_seed(seed, 0), derive_seed(seed, 1)},
                                    models_->shape, models_->image);
    std::vector<std::uint8_t> both(image_bytes);
    both.insert(both.end(), segmap_bytes.begin(), segmap_bytes.end());

    GenerationRecord rec;
    rec.session_id = session_id;
    rec.created_ms = now_ms();
    rec.caption = caption;
    rec.seed = seed;
    rec.inputs_hash = hex64(fnv1a(std::string_view(reinterpret_cast<const char*>(both.data()), both.size())));
    rec.image_png = base64_encode(image_png(person.image));
    rec.segmap_png = base64_encode(segmap_png(person.segmap));
    rec.shape_map = base64_encode(segmap_png(out.shape_map));
    rec.output = base64_encode(image_png(out.image));
    rec = store_.append(std::move(rec));
    return {200,
            {{"shape_map", rec.shape_map},
             {"image", rec.output},
             {"session_id", rec.session_id},
             {"generation_id", rec.generation_id},
             {"seed", rec.seed}}};
  } catch (const BadRequest& e) {
    return error_result(400, e.message, e.field);
  }
}

HttpResult Service::interpolate(std::string_view body) {
  if (body.size() > kMaxPayloadBytes) return error_result(413, "payload larger than 8 MiB");
  if (!models_) return error_result(503, "checkpoints not loaded");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error_result(400, "body is not valid JSON");
  }
  if (!req.is_object()) return error_result(400, "body must be a JSON object");
  try {
    const std::string id_a = required_string(req, "generation_id_a");
    const std::string id_b = required_string(req, "generation_id_b");
    InterpolationMode mode;
    try {
      mode = parse_interpolation_mode(required_string(req, "mode"));
    } catch (const Error& e) {
      throw BadRequest{"mode must be shape, texture or both", "mode"};
    }
    if (!req.contains("steps") || !req["steps"].is_number_integer()) {
      throw BadRequest{"steps must be an integer", "steps"};
    }
    const auto steps = req["steps"].get<std::int64_t>();
    if (steps < 2 || steps > kMaxInterpolationSteps) throw BadRequest{"steps must lie in [2, 64]", "steps"};
    const auto a = store_.find(id_a);
    if (!a) return error_result(404, "unknown generation '" + id_a + "'", "generation_id_a");
    const auto b = store_.find(id_b);
    if (!b) return error_result(404, "unknown generation '" + id_b + "'", "generation_id_b");
    if (a->inputs_hash != b->inputs_hash) {
      throw BadRequest{"both generations must share the same input photo and segmentation", "generation_id_b"};
    }
    const PersonRecord person = make_person(image_from_png(base64_decode(a->image_png)),
                                            segmap_from_png(base64_decode(a->segmap_png)), a->caption);
    const WalkEndpoint ea{a->caption, {derive_seed(a->seed, 0), derive_seed(a->seed, 1)}};
    const WalkEndpoint eb{b->caption, {derive_seed(b->seed, 0), derive_seed(b->seed, 1)}};
    const auto frames =
        interpolation_walk(person, ea, eb, mode, static_cast<int>(steps), models_->shape, models_->image);
    nlohmann::json images = nlohmann::json::array(), maps = nlohmann::json::array();
    for (const auto& f : frames) {
      images.push_back(base64_encode(image_png(f.image)));
      maps.push_back(base64_encode(segmap_png(f.shape_map)));
    }
    return {200, {{"frames", images}, {"shape_maps", maps}}};
  } catch (const BadRequest& e) {
    return error_result(400, e.message, e.field);
  }
}

HttpResult Service::history(std::string_view session_id) const {
  if (session_id.empty()) return error_result(400, "missing session_id", "session_id");
  const auto records = store_.session(session_id);
  if (!records) return error_result(404, "unknown session '" + std::string(session_id) + "'", "session_id");
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : *records) {
    items.push_back({{"generation_id", r.generation_id},
                     {"caption", r.caption},
                     {"seed", r.seed},
                     {"created_ms", r.created_ms},
                     {"thumbnail", r.output},
                     {"shape_thumbnail", r.shape_map}});
  }
  return {200, {{"session_id", std::string(session_id)}, {"generations", items}}};
}

// ---------------------------------------------------------------- transport

void Service::serve(const std::string& host, int port) {
  auto& http = server_->http;
  http.set_payload_max_length(kMaxPayloadBytes);
  auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  http.Post("/api/generate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, generate(req.body));
  });
  http.Post("/api/interpolate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, interpolate(req.body));
  });
  http.Get("/api/history", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, history(req.get_param_value("session_id")));
  });
  http.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error_result(500, what));
  });
  http.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const char* msg = res.status == 413 ? "payload larger than 8 MiB" : res.status == 404 ? "not found" : "error";
      reply(res, error_result(res.status, msg));
    }
  });
  if (!http.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::wait_until_ready() const { server_->http.wait_until_ready(); }

void Service::stop() { server_->http.stop(); }

}  // namespace fashion
