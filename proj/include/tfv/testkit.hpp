#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfv/dataset.hpp"

namespace tfv::testkit {

/// xorshift64* (Vigna): shifts 12/25/27, multiplier 0x2545F4914F6CDD1D.
/// The seed is expanded with one splitmix64 step so seed 0 is valid.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed);

  std::uint64_t next();
  double uniform();  // [0, 1), 53-bit resolution
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint32_t uniform_int(std::uint32_t lo, std::uint32_t hi);  // inclusive
  double normal();  // Box-Muller

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Regime { Converging, Oscillatory, Diverging, Transitioning };
enum class Variant { Focused, Diluted };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

struct ScenarioSpec {
  std::string dataset_name = "synthetic";
  std::uint32_t n_cases = 6;
  std::uint32_t frames_min = 10;
  std::uint32_t frames_max = 20;
  std::vector<Regime> regimes{Regime::Converging};  // cycled over cases
  std::vector<std::string> channels{"pressure", "OH"};
  std::uint32_t signal_dim = 8;
  std::uint32_t noise_dim = 16;
  double noise_scale = 0.02;     // isotropic noise on the latent path
  double dilution_scale = 1.5;   // std of the pure-noise coordinates (diluted only)
  double anchor_spread = 3.0;
  Variant variant = Variant::Focused;
  std::uint32_t duplicate_cases = 0;  // last N cases copy the embeddings of the first N
  std::uint64_t seed = 1;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& spec);

struct GeneratedDataset {
  ScenarioSpec spec;
  std::vector<CaseRecord> records;  // ascending case_id
  nlohmann::json ground_truth;
};

/// Deterministic in the scenario. The signal coordinates depend only on the
/// seed, so focused and diluted variants of one seed share them exactly.
GeneratedDataset generate(const ScenarioSpec& spec);

/// In-memory dataset over the generated records (no image files).
DatasetHandle to_dataset(const GeneratedDataset& gen);

/// Writes manifest.json, embeddings/, images/ and ground_truth.json (with a
/// SHA-256 for every written file) under `dir`. Returns the manifest path.
std::filesystem::path write_dataset(const GeneratedDataset& gen, const std::filesystem::path& dir);

/// Tiny solid-colour PNG carrying `label` in a tEXt chunk.
std::string placeholder_png(const std::string& label, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b);

}  // namespace tfv::testkit
