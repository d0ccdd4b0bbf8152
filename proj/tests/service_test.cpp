#include <gtest/gtest.h>

#include <fstream>
#include <thread>
#include <unistd.h>

#include "fashion/png_io.hpp"
#include "fashion/service.hpp"
#include "fashion/synth_data.hpp"
#include "test_support.hpp"

#include "httplib.h"

using namespace fashion;
using fashion::testing::Gen;
using fashion::testing::TempDir;

namespace {

// Tiny trained checkpoints written once; each Service loads its own copy.
std::optional<LoadedModels> tiny_models() {
  static const TempDir dir("svc_models");
  static const bool written = [] {
    const auto data = generate_records(8, 3, 32);
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 4;
    c.gen_width = 2;
    c.disc_width = 2;
    c.checkpoint_dir = dir.path;
    for (StageKind k : {StageKind::kShape, StageKind::kImage}) {
      c.stage = k;
      train_stage(c, data);
    }
    return true;
  }();
  EXPECT_TRUE(written);
  auto models = Service::load_models(dir.path);
  EXPECT_TRUE(models.has_value());
  return models;
}

nlohmann::json request(int index, const std::string& caption, std::uint64_t seed, const std::string& session = {}) {
  const auto r = generate_records(index + 1, 77, 32)[index];
  nlohmann::json j = {{"image", base64_encode(image_png(r.image))},
                      {"segmap", base64_encode(segmap_png(r.segmap))},
                      {"caption", caption},
                      {"seed", seed}};
  if (!session.empty()) j["session_id"] = session;
  return j;
}

const std::string kCaption = "a man in a blue top with short sleeves and black pants";

}  // namespace

TEST(Base64, RoundTripsRandomBytes) {
  Gen g(4);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(g.integer(0, 255));
    const std::string s = base64_encode(v);
    EXPECT_EQ(s.size() % 4, 0u);
    EXPECT_EQ(base64_decode(s), v);
  }
  const std::string foobar = "foobar";
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>(foobar.begin(), foobar.end())), "Zm9vYmFy");
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'f', 'o'}), "Zm8=");
  EXPECT_THROW(base64_decode("abc"), Error);
  EXPECT_THROW(base64_decode("ab!d"), Error);
  EXPECT_THROW(base64_decode("a=bc"), Error);
}

TEST(Service, WithoutModelsAnswers503) {
  TempDir d("svc_503");
  Service s(std::nullopt, d.path / "s.jsonl");
  EXPECT_FALSE(s.ready());
  EXPECT_EQ(s.generate(request(0, kCaption, 1).dump()).status, 503);
  EXPECT_EQ(s.interpolate("{}").status, 503);
  EXPECT_EQ(s.history("nobody").status, 404);
  std::string why;
  EXPECT_FALSE(Service::load_models(d.path, &why));
  EXPECT_FALSE(why.empty());
}

TEST(Service, ValidatesRequests) {
  TempDir d("svc_400");
  Service s(tiny_models(), d.path / "s.jsonl");
  EXPECT_EQ(s.generate("{nope").status, 400);
  EXPECT_EQ(s.generate("[1,2]").status, 400);
  auto field_of = [&](const nlohmann::json& j) {
    const auto r = s.generate(j.dump());
    EXPECT_EQ(r.status, 400) << r.body;
    return r.body.value("field", "");
  };
  auto j = request(0, kCaption, 1);
  j.erase("caption");
  EXPECT_EQ(field_of(j), "caption");
  EXPECT_EQ(field_of(request(0, "", 1)), "caption");
  EXPECT_EQ(field_of(request(0, std::string(201, 'x'), 1)), "caption");
  j = request(0, kCaption, 1);
  j["image"] = "***";
  EXPECT_EQ(field_of(j), "image");
  j = request(0, kCaption, 1);
  j["segmap"] = j["image"];
  EXPECT_EQ(field_of(j), "segmap");
  j = request(0, kCaption, 1);
  j["seed"] = -3;
  EXPECT_EQ(field_of(j), "seed");
  j = request(0, kCaption, 1);
  j["session_id"] = "";
  EXPECT_EQ(field_of(j), "session_id");
  const auto big = generate_records(1, 2, 64)[0];
  j = {{"image", base64_encode(image_png(big.image))},
       {"segmap", base64_encode(segmap_png(big.segmap))},
       {"caption", kCaption}};
  EXPECT_EQ(field_of(j), "image");
  EXPECT_EQ(s.generate(std::string(kMaxPayloadBytes + 1, ' ')).status, 413);
  EXPECT_EQ(s.history("").status, 400);
  // 200 characters of multi-byte text is still within the limit.
  std::string accents;
  for (int i = 0; i < 200; ++i) accents += "\xc3\xa9";
  EXPECT_EQ(s.generate(request(0, accents, 1).dump()).status, 200);
}

TEST(Service, GenerateIsDeterministicAndHistoryOrdered) {
  TempDir d("svc_hist");
  const auto store = d.path / "s.jsonl";
  std::string first_image;
  {
    Service s(tiny_models(), store);
    const auto a = s.generate(request(1, kCaption, 9, "alice").dump());
    ASSERT_EQ(a.status, 200) << a.body;
    const auto b = s.generate(request(1, kCaption, 9, "alice").dump());
    EXPECT_EQ(a.body["image"], b.body["image"]);
    EXPECT_EQ(a.body["shape_map"], b.body["shape_map"]);
    EXPECT_NE(a.body["generation_id"], b.body["generation_id"]);
    s.generate(request(2, "a lady in a red top with long sleeves and blue skirt", 3, "bob").dump());
    const auto fresh = s.generate(request(1, kCaption, 4).dump());
    EXPECT_FALSE(fresh.body["session_id"].get<std::string>().empty());
    first_image = a.body["image"];
    const auto png = base64_decode(first_image);
    EXPECT_EQ(decode_png_rgb(png).height, 32);
  }
  // Reopen from disk after a torn final line.
  std::ofstream(store, std::ios::app) << R"({"generation_id":"g9)";
  Service s(tiny_models(), store);
  const auto h = s.history("alice");
  ASSERT_EQ(h.status, 200);
  ASSERT_EQ(h.body["generations"].size(), 2u);
  EXPECT_EQ(h.body["generations"][0]["generation_id"], "g00000001");
  EXPECT_EQ(h.body["generations"][1]["generation_id"], "g00000002");
  EXPECT_EQ(h.body["generations"][0]["thumbnail"], first_image);
  EXPECT_EQ(s.history("bob").body["generations"].size(), 1u);
  EXPECT_EQ(s.history("carol").status, 404);
}

TEST(Service, InterpolateBetweenGenerations) {
  TempDir d("svc_interp");
  Service s(tiny_models(), d.path / "s.jsonl");
  const auto a = s.generate(request(0, kCaption, 1, "x").dump()).body;
  const auto b = s.generate(request(0, "a man in a red top with long sleeves and blue shorts", 2, "x").dump()).body;
  const auto other = s.generate(request(1, kCaption, 1, "x").dump()).body;
  nlohmann::json j = {{"generation_id_a", a["generation_id"]}, {"generation_id_b", b["generation_id"]},
                      {"mode", "both"}, {"steps", 4}};
  const auto r = s.interpolate(j.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  ASSERT_EQ(r.body["frames"].size(), 4u);
  EXPECT_EQ(r.body["frames"][0], a["image"]);
  EXPECT_EQ(r.body["frames"][3], b["image"]);
  EXPECT_EQ(r.body["shape_maps"][0], a["shape_map"]);

  auto status = [&](nlohmann::json req) { return s.interpolate(req.dump()).status; };
  nlohmann::json bad = j;
  bad["generation_id_b"] = other["generation_id"];
  EXPECT_EQ(status(bad), 400);
  bad = j;
  bad["generation_id_a"] = "g99999999";
  EXPECT_EQ(status(bad), 404);
  bad = j;
  bad["steps"] = 65;
  EXPECT_EQ(status(bad), 400);
  bad = j;
  bad["steps"] = 1;
  EXPECT_EQ(status(bad), 400);
  bad = j;
  bad["mode"] = "colour";
  EXPECT_EQ(status(bad), 400);
}

TEST(Service, HttpTransport) {
  TempDir d("svc_http");
  Service s(tiny_models(), d.path / "s.jsonl");
  const int port = 20000 + static_cast<int>(getpid() % 20000);
  std::thread t([&] { s.serve("127.0.0.1", port); });
  s.wait_until_ready();
  httplib::Client c("127.0.0.1", port);
  const auto r = c.Post("/api/generate", request(0, kCaption, 5, "web").dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto h = c.Get("/api/history?session_id=web");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(nlohmann::json::parse(h->body)["generations"].size(), 1u);
  const auto bad = c.Post("/api/generate", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(nlohmann::json::parse(bad->body).contains("error"));
  const auto big = c.Post("/api/generate", std::string(kMaxPayloadBytes + 10, ' '), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);
  const auto missing = c.Get("/api/nothing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  s.stop();
  t.join();
}
