#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scaletrain/checkpoint.hpp"
#include "scaletrain/surgery.hpp"
#include "scaletrain/train_log.hpp"

using namespace scaletrain;
namespace fs = std::filesystem;

namespace {

const char* kArch = "name toy\ninput 2 9 9\nconv 4 3 1 1\nrelu\nmaxpool 2 2\nflatten\nfc 5\nrelu\nfc 3\nsoftmax\n";

Checkpoint random_checkpoint(std::uint64_t seed) {
  Rng rng(seed);
  const auto net = Network<float>::initialized(parse_architecture(kArch), rng);
  std::vector<Tensor<float>> velocity;
  for (const auto* p : net.parameters()) velocity.push_back(init_uniform<float>(p->shape(), rng));
  return make_checkpoint(net, velocity, 1 + rng.below(60), rng, rng.next(), rng.uniform(0, 1e4));
}

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / ("scaletrain_ck_" + name)).string();
}

std::vector<TrainLogRecord> read_log(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kLogHeader);
  std::vector<TrainLogRecord> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f[7];
    for (auto& x : f) std::getline(ss, x, ',');
    out.push_back({std::stoul(f[0]), parse_phase(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                   std::stod(f[5]), std::stod(f[6])});
  }
  return out;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ck = random_checkpoint(seed);
    EXPECT_EQ(decode_checkpoint(encode_checkpoint(ck)), ck);
  }
  const auto ck = random_checkpoint(99);
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(ck, path);
  EXPECT_EQ(load_checkpoint(path), ck);
  fs::remove(path);
}

TEST(Checkpoint, SpecialFloatsSurvive) {
  auto ck = random_checkpoint(1);
  ck.params[0].tensor[0] = -0.0f;
  ck.params[0].tensor[1] = 1e-45f;
  ck.params[0].tensor[2] = std::numeric_limits<float>::infinity();
  const auto back = decode_checkpoint(encode_checkpoint(ck));
  EXPECT_TRUE(std::signbit(back.params[0].tensor[0]));
  EXPECT_EQ(back.params[0].tensor[1], 1e-45f);
  EXPECT_EQ(back.params[0].tensor[2], std::numeric_limits<float>::infinity());
}

TEST(Checkpoint, StartsWithMagicAndVersion) {
  const auto bytes = encode_checkpoint(random_checkpoint(2));
  EXPECT_EQ(bytes.substr(0, 8), "SCLTCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(bytes.substr(9, 3), std::string(3, '\0'));
}

TEST(Checkpoint, FlippedPayloadByteFailsChecksum) {
  auto bytes = encode_checkpoint(random_checkpoint(3));
  for (std::size_t pos : {std::size_t{20}, bytes.size() / 2, bytes.size() - 5}) {
    auto copy = bytes;
    copy[pos] = static_cast<char>(copy[pos] ^ 0x10);
    EXPECT_THROW(decode_checkpoint(copy), ChecksumError) << pos;
  }
}

TEST(Checkpoint, HeaderErrors) {
  auto bytes = encode_checkpoint(random_checkpoint(4));
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), BadMagicError);
  auto version = bytes;
  version[8] = 2;
  EXPECT_THROW(decode_checkpoint(version), VersionMismatchError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), CorruptCheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST(Checkpoint, SlotsValidatedAgainstArchitecture) {
  auto ck = random_checkpoint(5);
  EXPECT_NO_THROW(network_from_checkpoint(ck));
  auto missing = ck;
  missing.params.pop_back();
  EXPECT_THROW(network_from_checkpoint(missing), ArchitectureMismatchError);
  auto dup = ck;
  dup.params.back().name = dup.params.front().name;
  EXPECT_THROW(network_from_checkpoint(dup), Error);
  auto wrong = ck;
  wrong.params[0].tensor = Tensor<float>({4, 2, 2, 2});
  EXPECT_THROW(network_from_checkpoint(wrong), ArchitectureMismatchError);
}

TEST(Checkpoint, ResizedCheckpointSavesAndLoadsUnderTarget) {
  const auto target = parse_architecture(
      "name t\ninput 3 32 32\nconv 8 5 1 0\nrelu\nmaxpool 2 2\nconv 8 3 1 0\nrelu\nmaxpool 2 2\nflatten\nfc 6\nsoftmax\n");
  const auto d = derive_pretrain_architecture(target);
  Rng rng(8);
  const auto pre = make_checkpoint(Network<float>::initialized(d.pretrain, rng), {}, 4, rng, 1, 0);
  const auto path = temp_file("resized.ckpt");
  save_checkpoint(pre, path);
  const auto resized = resize_checkpoint(load_checkpoint(path), target, d.plan);
  save_checkpoint(resized, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.arch, target);
  EXPECT_EQ(network_from_checkpoint(back).forward(Tensor<float>({1, 3, 32, 32}, 0.1f)).shape(), (Shape{1, 6}));
  fs::remove(path);
}

TEST(TrainLog, NumberFormatting) {
  EXPECT_EQ(format_log_number(5e-3), "0.005");
  EXPECT_EQ(format_log_number(59.25), "59.25");
  EXPECT_EQ(format_log_number(1e-5), "1e-05");
  EXPECT_EQ(format_log_number(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_log_row({3, Phase::Extra, 12.5, 50, 51.25, 5e-3, 0}), "3,extra,12.5,50,51.25,0.005,0");
}

TEST(TrainLog, HeaderOnceThenRows) {
  const auto path = temp_file("log.csv");
  fs::remove(path);
  const TrainLogRecord a{1, Phase::Pretrain, 1.5, 20, 21, 0.01, 1e-4};
  const TrainLogRecord b{2, Phase::ResizedContinue, 3.25, 30, 31.5, 5e-3, 0};
  append_log(a, path);
  {
    std::ifstream in(path);
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    EXPECT_EQ(l1, "epoch,phase,wall_s,train_acc,test_acc,lr,wd");
    EXPECT_EQ(l2, "1,pretrain,1.5,20,21,0.01,0.0001");
  }
  append_log(b, path);
  EXPECT_EQ(read_log(path), (std::vector<TrainLogRecord>{a, b}));
  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3u);
  fs::remove(path);
  EXPECT_THROW(append_log(a, "/nonexistent/dir/log.csv"), IoError);
}
