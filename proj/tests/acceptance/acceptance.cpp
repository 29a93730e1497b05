// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and budgets are pinned here.
// Usage: uwie_acceptance [criterion...]   (no arguments runs all nine)

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"
#include "support/tempdir.hpp"
#include "uwie/checkpoint.hpp"
#include "uwie/dataset.hpp"
#include "uwie/formation.hpp"
#include "uwie/metrics.hpp"
#include "uwie/network.hpp"
#include "uwie/training.hpp"
#include "uwie_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace uwie;
using testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number;
  const char* title;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// 1 -----------------------------------------------------------------------------------------

Outcome gradient_correctness() {
  constexpr double kTolerance = 1e-4;
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = testing::network_gradient_check(seed);
    checked += r.checked;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      where = r.worst_layer + " (seed " + std::to_string(seed) + ")";
    }
  }
  return {worst <= kTolerance && checked == 5 * architecture_parameter_count(),
          std::to_string(checked) + " gradients, max rel err " + fmt(worst) + " at " + where + ", tol 1e-4"};
}

// 2 -----------------------------------------------------------------------------------------

Outcome physics_roundtrip() {
  const std::array<double, 3> beta{0.8, 0.3, 0.2};
  const AmbientLight<double> ambient{{0.2, 0.5, 0.6}};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto clean = testing::make_scene<double>(48, 64, seed);
    const auto t = transmission_from_depth(AttenuationSpec<double>::uniform(beta, 2.0, 48, 64));
    const auto rec = reconstruct(degrade(clean, ambient, t), ambient, invert_transmission(t));
    for (std::size_t n = 0; n < clean.size(); ++n) {
      worst = std::max(worst, std::abs(rec.data()[n] - clean.data()[n]));
    }
  }
  return {worst < 1e-6, "max abs error " + fmt(worst) + " over 8 scenes, tol 1e-6"};
}

// 3 -----------------------------------------------------------------------------------------

Outcome overfit_one_pair() {
  const auto clean = testing::make_scene(64, 64, 7);
  const Tensor<float> t(64, 64, 3, 0.5f);
  const auto degraded = degrade(clean, AmbientLight<float>{{0.3f, 0.4f, 0.5f}}, t);
  TrainConfig cfg;
  cfg.epochs = 2000;  // one pair: one step per epoch
  cfg.train_resolution.reset();
  cfg.seed = 1;
  const auto result = train({{"pair", degraded, clean}}, cfg, init_params(1));
  const double loss = mse_loss(forward(degraded, result.params).enhanced, clean).loss;
  return {result.steps == 2000 && loss < 5e-4,
          std::to_string(result.steps) + " steps, final MSE " + fmt(loss) + ", tol 5e-4"};
}

// 4 -----------------------------------------------------------------------------------------

// Clean scenes for the corpus run carry more texture than the unit-test default: with almost
// flat regions the transmission branch has little local structure to key on.
constexpr double kCorpusTexture = 0.25;
constexpr int kCorpusSize = 64;

std::vector<TrainingPair> synthetic_corpus(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < count; ++i) {
    auto clean = testing::make_scene(kCorpusSize, kCorpusSize, seed * 1000 + i, kCorpusTexture);
    std::array<float, 3> beta{}, amb{};
    for (int c = 0; c < 3; ++c) {
      beta[c] = static_cast<float>(0.1 + 0.9 * u(rng));
      amb[c] = static_cast<float>(0.2 + 0.5 * u(rng));
    }
    const auto depth = static_cast<float>(1.0 + 2.0 * u(rng));
    auto degraded = degrade(clean, AmbientLight<float>{amb},
                            testing::uniform_transmission(kCorpusSize, kCorpusSize, beta, depth));
    pairs.push_back({std::to_string(i), std::move(degraded), std::move(clean)});
  }
  return pairs;
}

std::pair<double, double> mean_psnr(const std::vector<TrainingPair>& pairs, const NetworkParams<float>& p) {
  double degraded = 0.0, enhanced = 0.0;
  for (const auto& pair : pairs) {
    degraded += psnr(pair.input, pair.target);
    enhanced += psnr(forward(pair.input, p).enhanced, pair.target);
  }
  return {degraded / pairs.size(), enhanced / pairs.size()};
}

Outcome synthetic_corpus_learning() {
  // 20 training pairs; the test set is 50 further pairs from the same generator, enough to keep
  // the mean stable across draws.
  const auto train_set = synthetic_corpus(20, 1);
  const auto test_set = synthetic_corpus(50, 2);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.train_resolution.reset();
  cfg.seed = 3;
  const auto result = train(train_set, cfg, init_params(3));
  const auto [test_deg, test_enh] = mean_psnr(test_set, result.params);
  const auto [train_deg, train_enh] = mean_psnr(train_set, result.params);
  const double gain = test_enh - test_deg;
  return {gain >= 3.0, "test PSNR " + fmt(test_deg) + " -> " + fmt(test_enh) + " dB (gain " + fmt(gain) +
                           ", need >= 3); training pairs " + fmt(train_deg) + " -> " + fmt(train_enh)};
}

// 5 -----------------------------------------------------------------------------------------

Outcome metric_oracles() {
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = testing::make_scene(40, 40, seed);
    check(std::abs(ssim(x, x) - 1.0) <= 1e-9, "ssim(x,x) seed " + std::to_string(seed));
  }
  // 0.1 is not a binary fraction: the squared offset lands one ulp away from 0.01.
  const auto black = testing::make_uniform<double>(16, 16, {0.0, 0.0, 0.0});
  const double p20 = psnr(black, testing::make_uniform<double>(16, 16, {0.1, 0.1, 0.1}));
  check(std::abs(p20 - 20.0) <= 1e-12, "psnr offset 0.1 = " + fmt(p20));
  const auto grey = testing::make_uniform<double>(16, 16, {0.35, 0.35, 0.35});
  const auto grey_up = testing::make_uniform<double>(16, 16, {0.45, 0.45, 0.45});
  check(std::abs(psnr(grey, grey_up) - 20.0) <= 1e-12, "psnr offset 0.1 at 0.35");

  for (const float v : {0.0f, 0.1f, 0.5f, 0.73f, 1.0f}) {
    const auto img = testing::make_uniform<float>(32, 32, {v, v, v});
    check(uciqe(img) == 0.0, "uciqe uniform " + fmt(v));
    check(uiqm(img) == 0.0, "uiqm uniform " + fmt(v));
  }

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto clean = testing::make_scene(48, 48, 100 + seed);
    double prev = kInfinitePsnr;
    for (const double sigma : {0.01, 0.02, 0.05, 0.1}) {
      std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(sigma * 1000));
      std::normal_distribution<double> n(0.0, sigma);
      auto noisy = clean;
      for (auto& v : noisy.data()) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
      const double p = psnr(clean, noisy);
      check(p < prev, "psnr not decreasing at sigma " + fmt(sigma) + " seed " + std::to_string(seed));
      prev = p;
    }
  }
  std::string detail = "ssim, psnr, uciqe, uiqm oracles and 10-seed noise ladder";
  if (!failures.empty()) detail = std::to_string(failures.size()) + " failures, first: " + failures.front();
  return {failures.empty(), detail};
}

// 6 -----------------------------------------------------------------------------------------

Outcome dilation_equivalence() {
  double worst = 0.0;
  for (const int dilation : {1, 2, 5}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto in = testing::make_random<double>(17, 23, 6, seed * 7 + dilation);
      ConvKernel<double> k(3, 6, 8, dilation);
      std::mt19937_64 rng(seed + 100 * dilation);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (auto& w : k.weights) w = u(rng);
      for (auto& b : k.bias) b = u(rng);
      const auto got = conv2d(in, k);
      const auto want = testing::brute_force_conv(in, k);
      for (std::size_t n = 0; n < got.size(); ++n) {
        worst = std::max(worst, std::abs(got.data()[n] - want.data()[n]));
      }
    }
  }
  bool bitwise = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto in = testing::make_random<double>(12, 15, 3, 50 + seed);
    ConvKernel<double> k(3, 3, 4, 1);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& w : k.weights) w = u(rng);
    for (auto& b : k.bias) b = u(rng);
    const auto a = conv2d(in, k);
    const auto b = testing::plain_conv(in, k);
    bitwise = bitwise && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
  }
  return {worst <= 1e-6 && bitwise,
          "max abs diff vs oracle " + fmt(worst) + " (tol 1e-6), rate-1 bitwise " + (bitwise ? "equal" : "DIFFERS")};
}

// 7 -----------------------------------------------------------------------------------------

std::string pair_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

Outcome dataset_contract() {
  TempDir dir;
  const std::vector<std::uint8_t> pixels(4 * 4 * 3, 128);
  fs::create_directories(dir / "raw-890");
  fs::create_directories(dir / "reference-890");
  for (int i = 0; i < 890; ++i) {
    testing::write_png_raw(dir / "raw-890" / (pair_id(i) + ".png"), 4, 4, PNG_FORMAT_RGB, pixels);
    testing::write_png_raw(dir / "reference-890" / (pair_id(i) + ".png"), 4, 4, PNG_FORMAT_RGB, pixels);
  }
  const auto a = load_uieb(dir.path());
  const auto b = load_uieb(dir.path());
  bool ordered = a.train.entries.size() == 700 && a.test.entries.size() == 190;
  for (std::size_t i = 0; ordered && i < 700; ++i) {
    ordered = a.train.entries[i].id == pair_id(static_cast<int>(i)) && a.train.entries[i].raw == b.train.entries[i].raw;
  }
  for (std::size_t i = 0; ordered && i < 190; ++i) {
    ordered = a.test.entries[i].id == pair_id(static_cast<int>(700 + i)) && a.test.entries[i].raw == b.test.entries[i].raw;
  }

  testing::write_png_raw(dir / "raw-890" / "stray.png", 4, 4, PNG_FORMAT_RGB, pixels);
  std::string orphan_message;
  try {
    load_uieb(dir.path());
  } catch (const ConfigError& e) {
    orphan_message = e.what();
  }
  const bool orphan = orphan_message.find("stray") != std::string::npos;
  return {ordered && orphan, std::to_string(a.train.entries.size()) + " train / " +
                                 std::to_string(a.test.entries.size()) + " test, ordering " +
                                 (ordered ? "deterministic" : "WRONG") + ", orphan " +
                                 (orphan ? "rejected by name" : "NOT rejected")};
}

// 8 -----------------------------------------------------------------------------------------

bool bit_identical(const NetworkParams<float>& a, const NetworkParams<float>& b) {
  const auto x = a.buffers();
  const auto y = b.buffers();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != y[i].size() || std::memcmp(x[i].data(), y[i].data(), x[i].size_bytes()) != 0) return false;
  }
  return true;
}

template <typename F>
std::string corrupt_message(F&& f) {
  try {
    f();
  } catch (const CorruptCheckpointError& e) {
    return e.what();
  }
  return {};
}

Outcome checkpoint_roundtrip() {
  TempDir dir;
  auto params = init_params(8);
  params.transmission.conv2.weights[0] = -0.0f;
  params.backscatter.conv1.bias[1] = std::numeric_limits<float>::denorm_min();
  save_checkpoint(params, dir / "m.uwie");
  const bool roundtrip = bit_identical(load_checkpoint(dir / "m.uwie"), params);

  const auto bytes = encode_checkpoint(params);
  const auto u32 = [&](std::size_t at) {
    return bytes[at] | (bytes[at + 1] << 8) | (bytes[at + 2] << 16) | (std::uint32_t{bytes[at + 3]} << 24);
  };
  auto manifest = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + u32(8));
  manifest[3]["shape"][0] = manifest[3]["shape"][0].get<int>() + 1;
  const auto text = manifest.dump();
  std::vector<std::uint8_t> bad(bytes.begin(), bytes.begin() + 8);
  for (int s = 0; s < 32; s += 8) bad.push_back(static_cast<std::uint8_t>(text.size() >> s));
  bad.insert(bad.end(), text.begin(), text.end());
  bad.insert(bad.end(), bytes.begin() + 12 + u32(8), bytes.end());
  const auto shape_msg = corrupt_message([&] { decode_checkpoint(bad); });
  const bool names_layer = shape_msg.find(architecture_manifest()[3].name) != std::string::npos;

  bool truncations = true;
  for (const std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{11}, std::size_t{40}, bytes.size() - 1}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(len));
    truncations = truncations && !corrupt_message([&] { decode_checkpoint(cut); }).empty();
  }

  // A failed load must leave the caller's parameters untouched.
  {
    std::ofstream out(dir / "cut.uwie", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
  }
  auto held = init_params(9);
  const auto before = held;
  const bool threw = !corrupt_message([&] { held = load_checkpoint(dir / "cut.uwie"); }).empty();
  const bool untouched = bit_identical(held, before);

  return {roundtrip && names_layer && truncations && threw && untouched,
          std::string("roundtrip ") + (roundtrip ? "bit-exact" : "DIFFERS") + ", bad shape " +
              (names_layer ? "names layer" : "NOT reported") + ", truncations " +
              (truncations ? "rejected" : "ACCEPTED") + ", failed load " +
              (threw && untouched ? "leaves state intact" : "LEAKS state")};
}

// 9 -----------------------------------------------------------------------------------------

Outcome benchmark_harness() {
  TempDir dir;
  std::ostringstream out, err;
  const int code = cli::run({"uwie", "benchmark", "--width", "640", "--height", "480", "--iters", "3", "--output",
                             (dir / "bench.json").string(), "--report-format", "json"},
                            out, err);
  if (code != 0) return {false, "exit code " + std::to_string(code) + ": " + err.str()};
  const auto report = nlohmann::json::parse(std::ifstream(dir / "bench.json"));
  const double fps = report["fps"].get<double>();
  bool breakdown = true;
  for (const auto* key : {"backscatter_ms", "transmission_ms", "reconstruction_ms"}) {
    breakdown = breakdown && report.contains(key) && std::isfinite(report[key].get<double>());
  }
  for (const auto* line : {"stage backscatter", "stage transmission", "stage reconstruction"}) {
    breakdown = breakdown && out.str().find(line) != std::string::npos;
  }
  const bool context = out.str().find("9.868") != std::string::npos;
  return {std::isfinite(fps) && fps > 0.0 && breakdown && context,
          "fps " + fmt(fps) + " at 640x480, stages " + (breakdown ? "complete" : "MISSING") +
              ", reference figure " + (context ? "shown as context" : "MISSING")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 60, gradient_correctness},
      {2, "physics roundtrip", 5, physics_roundtrip},
      {3, "overfit one pair", 300, overfit_one_pair},
      {4, "synthetic corpus learning", 1800, synthetic_corpus_learning},
      {5, "metric oracles", 30, metric_oracles},
      {6, "dilated convolution equivalence", 10, dilation_equivalence},
      {7, "dataset contract", 30, dataset_contract},
      {8, "checkpoint roundtrip", 30, checkpoint_roundtrip},
      {9, "benchmark harness", 120, benchmark_harness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.number << ". " << c.title << ": " << o.detail << " ["
              << fmt(secs) << " s, budget " << c.budget_seconds << " s" << (in_budget ? "" : ", EXCEEDED") << "]"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
