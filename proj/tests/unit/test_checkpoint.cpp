#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sten/checkpoint.hpp"
#include "sten/rng.hpp"

using namespace sten;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 2;
  c.hash_table_size = 11;
  c.seq_len = 3;
  c.ffn_hidden = 4;
  c.att_dim = 4;
  c.tower = {8, 4, 2};
  return c;
}

std::vector<Sample> tiny_samples(std::size_t n) {
  Rng rng(5);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.label = static_cast<int>(i % 2);
    s.user_id = "u" + std::to_string(i % 4);
    s.user_gender = i % 2 ? "f" : "m";
    s.item_id = "i" + std::to_string(i % 7);
    s.item_category = "c" + std::to_string(i % 3);
    s.request_time = 1704067200 + static_cast<std::int64_t>(i) * 7321;
    s.request_location = {31.2 + 0.001 * static_cast<double>(i % 9), 121.4};
    s.request_aoi = "a" + std::to_string(i % 5);
    std::size_t events = i % 5;
    for (std::size_t k = 0; k < events; ++k) {
      BehaviorEvent e;
      e.item_id = "i" + std::to_string((i + k) % 7);
      e.category = "c" + std::to_string((i + k) % 3);
      e.click_time = s.request_time - static_cast<std::int64_t>((events - k) * 3600 * 5);
      e.location = s.request_location;
      s.behaviors.push_back(e);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Leaves the model with non-default batch-norm running statistics.
void perturb_bn(StENModel& model) {
  auto samples = tiny_samples(8);
  PaddedBatch batch = encode_batch(samples, model.config());
  Graph g;
  (void)model.forward(g, batch, BnMode::Train);
}

std::filesystem::path temp_ckpt(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
  StENModel model(tiny_config(), 17);
  perturb_bn(model);
  auto p1 = temp_ckpt("sten_ckpt_a.bin");
  auto p2 = temp_ckpt("sten_ckpt_b.bin");
  save_checkpoint(p1.string(), model);
  StENModel loaded = load_checkpoint(p1.string());
  save_checkpoint(p2.string(), loaded);
  CHECK(read_bytes(p1) == read_bytes(p2));

  // Every tensor identical to the source model, bit for bit.
  REQUIRE(loaded.params().size() == model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    CHECK(loaded.params()[i].name == model.params()[i].name);
    CHECK(loaded.params()[i].value.shape == model.params()[i].value.shape);
    CHECK(loaded.params()[i].value.v == model.params()[i].value.v);
  }
  REQUIRE(loaded.bn_states().size() == model.bn_states().size());
  for (std::size_t i = 0; i < model.bn_states().size(); ++i) {
    CHECK(loaded.bn_states()[i].running_mean.v == model.bn_states()[i].running_mean.v);
    CHECK(loaded.bn_states()[i].running_var.v == model.bn_states()[i].running_var.v);
  }
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("loaded model predicts identically to the saved one") {
  StENModel model(tiny_config(), 23);
  perturb_bn(model);
  auto p = temp_ckpt("sten_ckpt_pred.bin");
  save_checkpoint(p.string(), model);
  StENModel loaded = load_checkpoint(p.string());
  auto samples = tiny_samples(20);
  std::vector<double> a = model.predict(samples);
  std::vector<double> b = loaded.predict(samples);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // zero-ulp
  std::filesystem::remove(p);
}

TEST_CASE("checkpoint embeds the architecture") {
  ModelConfig cfg = tiny_config();
  cfg.ablation.stpre = false;
  cfg.seq_len = 5;
  StENModel model(cfg, 3);
  auto p = temp_ckpt("sten_ckpt_cfg.bin");
  save_checkpoint(p.string(), model);
  StENModel loaded = load_checkpoint(p.string());
  CHECK(loaded.config().seq_len == 5);
  CHECK(loaded.config().ablation.stpre == false);
  CHECK(loaded.config().embed_dim == cfg.embed_dim);
  CHECK(loaded.params().size() == model.params().size());
  std::filesystem::remove(p);
}

TEST_CASE("load rejects corrupted files") {
  StENModel model(tiny_config(), 29);
  auto p = temp_ckpt("sten_ckpt_bad.bin");
  save_checkpoint(p.string(), model);
  const std::string good = read_bytes(p);

  SUBCASE("bad magic") {
    std::string bytes = good;
    bytes[0] = 'X';
    write_bytes(p, bytes);
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);
  }
  SUBCASE("truncated") {
    write_bytes(p, good.substr(0, good.size() - 10));
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);
  }
  SUBCASE("truncated inside the header") {
    write_bytes(p, good.substr(0, 12));
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);
  }
  SUBCASE("trailing bytes") {
    write_bytes(p, good + "extra");
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);
  }
  SUBCASE("unknown tensor name") {
    std::string bytes = good;
    std::size_t pos = bytes.find("embed.user_id");
    REQUIRE(pos != std::string::npos);
    bytes[pos] = 'x';
    write_bytes(p, bytes);
    try {
      load_checkpoint(p.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("unknown tensor") != std::string::npos);
    }
  }
  SUBCASE("duplicate tensor name") {
    // item_id and user_id tables share name length and shape; renaming one
    // onto the other turns a valid file into a duplicate.
    std::string bytes = good;
    std::size_t pos = bytes.find("embed.item_id");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 13, "embed.user_id");
    write_bytes(p, bytes);
    try {
      load_checkpoint(p.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
  }
  SUBCASE("shape mismatch") {
    // First tensor's leading dim sits right after its name, dtype, and rank.
    std::string bytes = good;
    std::size_t pos = bytes.find("embed.user_id");
    REQUIRE(pos != std::string::npos);
    std::size_t dim_pos = pos + 13 + 1 + 1;
    bytes[dim_pos] = static_cast<char>(bytes[dim_pos] + 1);
    write_bytes(p, bytes);
    try {
      load_checkpoint(p.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
    }
  }
  SUBCASE("wrong tensor count") {
    std::string bytes = good;
    std::size_t pos = bytes.find("---\n");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 4] = static_cast<char>(bytes[pos + 4] + 1);
    write_bytes(p, bytes);
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);
  }
  SUBCASE("unknown dtype") {
    std::string bytes = good;
    std::size_t pos = bytes.find("embed.user_id");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 13] = 1;
    write_bytes(p, bytes);
    try {
      load_checkpoint(p.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("dtype") != std::string::npos);
    }
  }
  std::filesystem::remove(p);
}

TEST_CASE("load of a missing file throws IoError") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/sten.ckpt"), IoError);
}

TEST_CASE("save does not leave a temp file behind") {
  StENModel model(tiny_config(), 31);
  auto p = temp_ckpt("sten_ckpt_atomic.bin");
  save_checkpoint(p.string(), model);
  CHECK(std::filesystem::exists(p));
  CHECK(!std::filesystem::exists(p.string() + ".tmp"));
  std::filesystem::remove(p);
}
