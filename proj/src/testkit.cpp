#include "tfv/testkit.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <numbers>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv::testkit {
namespace {

using nlohmann::json;
using Vec = std::vector<double>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(seed ^ splitmix64(a)) ^ b) ^ c);
}

// Parameter bounds of the simulated dataset.
constexpr double kPMin = 0.8, kPMax = 2.1;
constexpr double kTMin = 565.0, kTMax = 830.0;
constexpr double kH2oMin = 7.8, kH2oMax = 14.0;

constexpr double kConvergeRate = 0.35;

Vec random_vec(Xorshift64Star& rng, std::size_t dim, double scale) {
  Vec v(dim);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec unit(Xorshift64Star& rng, std::size_t dim) {
  Vec v = random_vec(rng, dim, 1.0);
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

// Unit vector orthogonal to u (Gram-Schmidt on a random draw).
Vec orthogonal_unit(Xorshift64Star& rng, const Vec& u) {
  Vec v = random_vec(rng, u.size(), 1.0);
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += v[i] * u[i];
  for (std::size_t i = 0; i < u.size(); ++i) v[i] -= dot * u[i];
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

struct LatentPath {
  std::vector<Vec> points;
  std::vector<Vec> anchors;
  std::optional<std::uint32_t> transition_index;
};

void converge_step(std::vector<Vec>& pts, const Vec& anchor) {
  Vec next = pts.back();
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += kConvergeRate * (anchor[i] - next[i]);
  pts.push_back(std::move(next));
}

LatentPath latent_path(Regime regime, std::uint32_t n, std::uint32_t dim, double spread,
                       Xorshift64Star& rng) {
  LatentPath lp;
  const Vec start = random_vec(rng, dim, spread);
  const Vec anchor = random_vec(rng, dim, spread);
  lp.anchors.push_back(anchor);
  switch (regime) {
    case Regime::Converging:
      lp.points.push_back(start);
      while (lp.points.size() < n) converge_step(lp.points, anchor);
      break;
    case Regime::Transitioning: {
      const Vec second = random_vec(rng, dim, spread);
      lp.anchors.push_back(second);
      const std::uint32_t switch_at = std::max<std::uint32_t>(1, n / 2);
      lp.transition_index = switch_at;
      lp.points.push_back(start);
      while (lp.points.size() < n)
        converge_step(lp.points, lp.points.size() < switch_at ? anchor : second);
      break;
    }
    case Regime::Oscillatory: {
      const Vec u = unit(rng, dim);
      const Vec v = orthogonal_unit(rng, u);
      const double omega = 2.0 * std::numbers::pi / 7.0;
      for (std::uint32_t t = 0; t < n; ++t) {
        Vec p = anchor;
        for (std::size_t i = 0; i < dim; ++i)
          p[i] += std::cos(omega * t) * u[i] + std::sin(omega * t) * v[i];
        lp.points.push_back(std::move(p));
      }
      break;
    }
    case Regime::Diverging: {
      const Vec u = unit(rng, dim);
      const Vec v = orthogonal_unit(rng, u);
      lp.points.push_back(anchor);
      double step = 0.05;
      for (std::uint32_t t = 1; t < n; ++t, step *= 1.3) {
        Vec p = lp.points.back();
        const double angle = 0.3 * t;
        for (std::size_t i = 0; i < dim; ++i)
          p[i] += step * (std::cos(angle) * u[i] + std::sin(angle) * v[i]);
        lp.points.push_back(std::move(p));
      }
      break;
    }
  }
  return lp;
}

double round_to(double v, double q) { return std::round(v / q) * q; }

void put_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void png_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(
                    crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

std::array<std::uint8_t, 3> regime_colour(Regime r, std::uint32_t t) {
  const auto shade = static_cast<std::uint8_t>(std::min<std::uint32_t>(255, 80 + 8 * t));
  switch (r) {
    case Regime::Converging: return {40, shade, 60};
    case Regime::Oscillatory: return {40, 60, shade};
    case Regime::Diverging: return {shade, 50, 40};
    case Regime::Transitioning: return {shade, shade, 40};
  }
  return {128, 128, 128};
}

}  // namespace

Xorshift64Star::Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
  if (state_ == 0) state_ = 0x2545F4914F6CDD1Dull;
}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1Dull;
}

double Xorshift64Star::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint32_t Xorshift64Star::uniform_int(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  return lo + static_cast<std::uint32_t>(next() % span);
}

double Xorshift64Star::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Converging: return "converging";
    case Regime::Oscillatory: return "oscillatory";
    case Regime::Diverging: return "diverging";
    case Regime::Transitioning: return "transitioning";
  }
  return "converging";
}

Regime parse_regime(std::string_view s) {
  if (s == "converging") return Regime::Converging;
  if (s == "oscillatory") return Regime::Oscillatory;
  if (s == "diverging") return Regime::Diverging;
  if (s == "transitioning") return Regime::Transitioning;
  throw Error(ErrorCode::InvalidArgument, "unknown regime '" + std::string(s) + "'");
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  s.dataset_name = j.value("dataset_name", s.dataset_name);
  s.n_cases = j.value("n_cases", s.n_cases);
  if (j.contains("frames_per_case")) {
    s.frames_min = j["frames_per_case"].at(0).get<std::uint32_t>();
    s.frames_max = j["frames_per_case"].at(1).get<std::uint32_t>();
  }
  if (j.contains("regimes")) {
    s.regimes.clear();
    for (const auto& r : j["regimes"]) s.regimes.push_back(parse_regime(r.get<std::string>()));
  }
  s.channels = j.value("channels", s.channels);
  s.signal_dim = j.value("signal_dim", s.signal_dim);
  s.noise_dim = j.value("noise_dim", s.noise_dim);
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  s.dilution_scale = j.value("dilution_scale", s.dilution_scale);
  s.anchor_spread = j.value("anchor_spread", s.anchor_spread);
  const auto variant = j.value("variant", std::string("focused"));
  if (variant == "focused")
    s.variant = Variant::Focused;
  else if (variant == "diluted")
    s.variant = Variant::Diluted;
  else
    throw Error(ErrorCode::InvalidArgument, "unknown variant '" + variant + "'");
  s.duplicate_cases = j.value("duplicate_cases", s.duplicate_cases);
  s.seed = j.value("seed", s.seed);

  if (s.n_cases < 1 || s.signal_dim < 1 || s.frames_min < 1 || s.frames_min > s.frames_max ||
      s.regimes.empty() || s.channels.empty() || 2 * s.duplicate_cases > s.n_cases ||
      (s.variant == Variant::Diluted && s.noise_dim < 1))
    throw Error(ErrorCode::InvalidArgument, "invalid scenario spec");
  return s;
}

json to_json(const ScenarioSpec& s) {
  json regimes = json::array();
  for (auto r : s.regimes) regimes.push_back(std::string(to_string(r)));
  return {{"dataset_name", s.dataset_name},
          {"n_cases", s.n_cases},
          {"frames_per_case", {s.frames_min, s.frames_max}},
          {"regimes", regimes},
          {"channels", s.channels},
          {"signal_dim", s.signal_dim},
          {"noise_dim", s.noise_dim},
          {"noise_scale", s.noise_scale},
          {"dilution_scale", s.dilution_scale},
          {"anchor_spread", s.anchor_spread},
          {"variant", s.variant == Variant::Focused ? "focused" : "diluted"},
          {"duplicate_cases", s.duplicate_cases},
          {"seed", s.seed}};
}

GeneratedDataset generate(const ScenarioSpec& spec) {
  GeneratedDataset gen;
  gen.spec = spec;
  json gt_cases = json::array();
  const std::uint32_t originals = spec.n_cases - spec.duplicate_cases;
  const bool diluted = spec.variant == Variant::Diluted;
  const std::uint32_t dim = spec.signal_dim + (diluted ? spec.noise_dim : 0);

  Xorshift64Star param_rng(derive_seed(spec.seed, 0xC0FFEE, 0, 0));
  for (std::uint32_t c = 0; c < spec.n_cases; ++c) {
    CaseRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "case_%03u", c);
    rec.case_id = id;
    if (c == 0) {
      rec.params = {kPMin, kTMin, kH2oMin};
    } else if (c == 1) {
      rec.params = {kPMax, kTMax, kH2oMax};
    } else {
      rec.params = {round_to(param_rng.uniform(kPMin, kPMax), 0.01),
                    round_to(param_rng.uniform(kTMin, kTMax), 1.0),
                    round_to(param_rng.uniform(kH2oMin, kH2oMax), 0.1)};
    }
    const bool duplicate = c >= originals;
    const std::uint32_t source = duplicate ? c - originals : c;
    const Regime regime = spec.regimes[source % spec.regimes.size()];
    Xorshift64Star len_rng(derive_seed(spec.seed, source, 0x1E6, 0));
    const std::uint32_t n = len_rng.uniform_int(spec.frames_min, spec.frames_max);

    json gt = {{"case_id", rec.case_id},
               {"regime", std::string(to_string(regime))},
               {"n_frames", n},
               {"params", {{"P_MPa", rec.params.p_static_mpa},
                           {"T_K", rec.params.t_static_k},
                           {"H2O_pct", rec.params.h2o_pct}}},
               {"anchors", json::object()}};
    if (duplicate) {
      char src[32];
      std::snprintf(src, sizeof src, "case_%03u", source);
      gt["duplicate_of"] = src;
    }

    for (std::uint32_t ch = 0; ch < spec.channels.size(); ++ch) {
      const auto& channel = spec.channels[ch];
      Xorshift64Star signal_rng(derive_seed(spec.seed, source, ch, 1));
      Xorshift64Star noise_rng(derive_seed(spec.seed, source, ch, 2));
      auto lp = latent_path(regime, n, spec.signal_dim, spec.anchor_spread, signal_rng);
      if (lp.transition_index) gt["transition_index"] = *lp.transition_index;
      gt["anchors"][channel] = lp.anchors;

      ChannelData cd;
      cd.embedding.case_id = rec.case_id;
      cd.embedding.channel = channel;
      cd.embedding.n_frames = n;
      cd.embedding.dim = dim;
      cd.embedding.values.reserve(static_cast<std::size_t>(n) * dim);
      for (std::uint32_t t = 0; t < n; ++t) {
        for (double x : lp.points[t])
          cd.embedding.values.push_back(static_cast<float>(x + spec.noise_scale * signal_rng.normal()));
        if (diluted)
          for (std::uint32_t k = 0; k < spec.noise_dim; ++k)
            cd.embedding.values.push_back(static_cast<float>(spec.dilution_scale * noise_rng.normal()));
        FrameRef f;
        f.case_id = rec.case_id;
        f.channel = channel;
        f.t_index = t;
        f.time_ms = 0.05 * (t + 1);
        f.image_path = "images/" + rec.case_id + "/" + channel + "_" + std::to_string(t) + ".png";
        cd.frames.push_back(std::move(f));
      }
      rec.channels.emplace(channel, std::move(cd));
    }
    gt_cases.push_back(std::move(gt));
    gen.records.push_back(std::move(rec));
  }
  gen.ground_truth = {{"scenario", to_json(spec)}, {"cases", std::move(gt_cases)}};
  return gen;
}

DatasetHandle to_dataset(const GeneratedDataset& gen) {
  return std::make_shared<const Dataset>(gen.spec.dataset_name, gen.spec.channels, gen.records,
                                         std::filesystem::path{}, "synthetic");
}

std::string placeholder_png(const std::string& label, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b) {
  constexpr std::uint32_t kSide = 4;
  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, kSide);
  put_be32(ihdr, kSide);
  ihdr += std::string{'\x08', '\x02', '\x00', '\x00', '\x00'};  // 8-bit RGB
  png_chunk(out, "IHDR", ihdr);
  png_chunk(out, "tEXt", std::string("tfv-frame") + '\0' + label);

  std::string raw;
  for (std::uint32_t y = 0; y < kSide; ++y) {
    raw.push_back('\0');
    for (std::uint32_t x = 0; x < kSide; ++x) {
      raw.push_back(static_cast<char>(r));
      raw.push_back(static_cast<char>(g));
      raw.push_back(static_cast<char>(b));
    }
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string idat(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(idat.data()), &len,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                9) != Z_OK)
    throw Error(ErrorCode::IoError, "zlib compression failed");
  idat.resize(len);
  png_chunk(out, "IDAT", idat);
  png_chunk(out, "IEND", {});
  return out;
}

std::filesystem::path write_dataset(const GeneratedDataset& gen, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json files = json::object();
  auto emit = [&](const std::string& rel, const std::string& bytes) {
    write_file_atomic(dir / rel, bytes);
    files[rel] = sha256_hex(bytes);
  };

  json cases = json::array();
  for (std::size_t c = 0; c < gen.records.size(); ++c) {
    const auto& rec = gen.records[c];
    const Regime regime =
        parse_regime(gen.ground_truth["cases"][c]["regime"].get<std::string>());
    json jc = {{"case_id", rec.case_id},
               {"params", {{"P_MPa", rec.params.p_static_mpa},
                           {"T_K", rec.params.t_static_k},
                           {"H2O_pct", rec.params.h2o_pct}}},
               {"channels", json::object()}};
    for (const auto& [channel, cd] : rec.channels) {
      const std::string emb_rel = "embeddings/" + rec.case_id + "_" + channel + ".tfv";
      emit(emb_rel, encode_embedding(cd.embedding));
      json frames = json::array();
      for (const auto& f : cd.frames) {
        const auto [r, g, b] = regime_colour(regime, f.t_index);
        emit(f.image_path, placeholder_png(rec.case_id + "/" + channel + "/" + std::to_string(f.t_index),
                                           r, g, b));
        frames.push_back({{"t_index", f.t_index}, {"time_ms", f.time_ms}, {"image", f.image_path}});
      }
      jc["channels"][channel] = {{"embedding_file", emb_rel}, {"frames", std::move(frames)}};
    }
    cases.push_back(std::move(jc));
  }

  json manifest = {{"dataset_name", gen.spec.dataset_name},
                   {"channels", gen.spec.channels},
                   {"embedding_provenance",
                    gen.spec.variant == Variant::Focused ? "synthetic focused (signal coordinates only)"
                                                         : "synthetic diluted (signal + pure-noise coordinates)"},
                   {"cases", std::move(cases)}};
  const auto manifest_text = manifest.dump(2) + "\n";
  emit("manifest.json", manifest_text);

  auto gt = gen.ground_truth;
  gt["files"] = std::move(files);
  write_file_atomic(dir / "ground_truth.json", gt.dump(2) + "\n");
  return dir / "manifest.json";
}

}  // namespace tfv::testkit
