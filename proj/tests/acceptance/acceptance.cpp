// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "oracles/oracles.hpp"
#include "test_support.hpp"
#include "tfv/clustering.hpp"
#include "tfv/digest.hpp"
#include "tfv/embedding_io.hpp"
#include "tfv/error.hpp"
#include "tfv/reports.hpp"
#include "tfv/service.hpp"
#include "tfv/testkit.hpp"

#include <httplib.h>

using namespace tfv;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first failure message; later checks still run.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      first_ = what;
    }
  }
  Outcome done(std::string summary) const { return {pass_, pass_ ? std::move(summary) : first_}; }

 private:
  bool pass_ = true;
  std::string first_;
};

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Point2> random_walk(testkit::Xorshift64Star& rng, std::size_t n) {
  std::vector<Point2> pts;
  Point2 p{rng.uniform(-3, 3), rng.uniform(-3, 3)};
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(p);
    p.x += rng.normal();
    p.y += rng.normal();
  }
  return pts;
}

std::vector<oracle::Pt> to_oracle(const std::vector<Point2>& pts) {
  std::vector<oracle::Pt> out;
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

CoordMap as_coords(const std::vector<Point2>& pts) {
  CoordMap m;
  for (std::size_t i = 0; i < pts.size(); ++i) m.emplace(FrameKey{"p", static_cast<std::uint32_t>(i)}, pts[i]);
  return m;
}

Outcome dtw_oracle() {
  Checker c;
  testkit::Xorshift64Star rng(20240601);
  for (int pair = 0; pair < 200; ++pair) {
    const auto pa = random_walk(rng, 1 + rng.uniform_int(1, 5));
    const auto pb = random_walk(rng, 1 + rng.uniform_int(1, 5));
    const auto a = test::make_traj("a", pa), b = test::make_traj("b", pb);
    const auto ab = trajectory_dissimilarity(a, b);
    const auto ba = trajectory_dissimilarity(b, a);
    const auto tag = " (pair " + std::to_string(pair) + ")";
    c.expect(ab.value == oracle::dtw_enumerate(to_oracle(pa), to_oracle(pb)), "oracle mismatch" + tag);
    c.expect(trajectory_dissimilarity(a, a).value == 0.0, "d(a,a) != 0" + tag);
    c.expect(std::abs(ab.value - ba.value) <= 1e-9, "asymmetric" + tag);
    c.expect(std::abs(path_cost(a, b, ab.path) - ab.value) <= 1e-9, "path cost mismatch" + tag);
  }
  return c.done("200 pairs exact vs enumeration oracle");
}

Outcome dbscan_oracle() {
  Checker c;
  const std::pair<double, std::uint32_t> settings[] = {{0.05, 3}, {0.1, 5}, {0.2, 10}};
  std::size_t runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testkit::Xorshift64Star rng(seed * 1000003);
    const auto n = rng.uniform_int(100, 500);
    std::vector<Point2> pts;
    std::vector<oracle::Pt> op;
    // Half uniform, half in three tight blobs so every setting sees clusters and noise.
    for (std::uint32_t i = 0; i < n; ++i) {
      Point2 p;
      if (i % 2 == 0) {
        p = {rng.uniform(), rng.uniform()};
      } else {
        const double cx = 0.2 + 0.3 * (i % 3), cy = 0.5;
        p = {cx + 0.05 * rng.normal(), cy + 0.05 * rng.normal()};
      }
      pts.push_back(p);
      op.push_back({p.x, p.y});
    }
    const auto coords = as_coords(pts);
    for (const auto& [eps, min_samples] : settings) {
      const auto model = dbscan(coords, eps, min_samples);
      std::vector<int> labels;
      for (const auto& [k, l] : model.labels) labels.push_back(l);
      c.expect(labels == oracle::dbscan(op, eps, min_samples),
               "partition mismatch at seed " + std::to_string(seed) + " eps " + fmt("%g", eps));
      ++runs;
    }
  }
  return c.done(std::to_string(runs) + " runs identical to textbook oracle");
}

Outcome centroid_selection() {
  Checker c;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    testkit::Xorshift64Star rng(seed * 31337);
    std::vector<Point2> pts;
    const auto n = rng.uniform_int(50, 200);
    // Snap to a coarse grid so equal distances actually occur.
    for (std::uint32_t i = 0; i < n; ++i)
      pts.push_back({std::round(rng.uniform() * 20) / 20, std::round(rng.uniform() * 20) / 20});
    const auto coords = as_coords(pts);
    const auto model = select_centroids(dbscan(coords, 0.08, 3), coords);
    for (int cl = 0; cl < model.cluster_count; ++cl) {
      const auto members = model.members(cl);
      std::vector<oracle::Pt> mp;
      for (const auto& k : members) mp.push_back({coords.at(k).x, coords.at(k).y});
      c.expect(model.centroids.at(cl) == members[oracle::centroid(mp)],
               "centroid mismatch at seed " + std::to_string(seed));
    }
  }
  CoordMap square;
  square[{"b", 0}] = {1, 1};
  square[{"a", 3}] = {-1, 1};
  square[{"a", 7}] = {-1, -1};
  square[{"c", 0}] = {1, -1};
  const auto sq = select_centroids(dbscan(square, 3.0, 2), square);
  c.expect(sq.cluster_count == 1 && sq.centroids.at(0) == FrameKey{"a", 3}, "square tie not resolved to (a,3)");
  return c.done("50 clusterings match brute force; square tie -> (a,3)");
}

Outcome pca_oracle() {
  Checker c;
  testkit::Xorshift64Star rng(77);
  double worst_coord = 0.0, worst_ortho = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd rows(50, 10);
    oracle::Matrix orows(50, std::vector<double>(10));
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 10; ++j) orows[i][j] = rows(i, j) = rng.normal() * (1.0 + j);
    const auto pca = pca_2d(rows);
    const auto ref = oracle::pca_2d(orows);
    for (int i = 0; i < 50; ++i)
      for (int k = 0; k < 2; ++k) worst_coord = std::max(worst_coord, std::abs(pca.coords(i, k) - ref.coords[i][k]));
    const auto& comp = pca.stats.components;
    worst_ortho = std::max({worst_ortho, std::abs(comp.col(0).norm() - 1.0), std::abs(comp.col(1).norm() - 1.0),
                            std::abs(comp.col(0).dot(comp.col(1)))});
    Eigen::RowVectorXd shift(10);
    for (int j = 0; j < 10; ++j) shift(j) = rng.uniform(-50, 50);
    const auto moved = pca_2d(rows.rowwise() + shift);
    worst_shift = std::max(worst_shift, (moved.coords - pca.coords).cwiseAbs().maxCoeff());
  }
  c.expect(worst_ortho <= 1e-8, "orthonormality error " + fmt("%.3e", worst_ortho));
  c.expect(worst_coord <= 1e-6, "coordinate error " + fmt("%.3e", worst_coord));
  c.expect(worst_shift <= 1e-8, "translation error " + fmt("%.3e", worst_shift));
  return c.done("max coord err " + fmt("%.2e", worst_coord) + ", ortho err " + fmt("%.2e", worst_ortho) +
                ", shift err " + fmt("%.2e", worst_shift));
}

double variant_mean_radius(const testkit::ScenarioSpec& spec) {
  const auto ds = testkit::to_dataset(testkit::generate(spec));
  const auto proj = fit_pca_2d(*ds, "pressure", ds->case_ids());
  const auto trajs = build_all_trajectories(proj.coords, "pressure");
  return mean_convergence_radius(trajs, kDefaultConvergenceWindow);
}

Outcome convergence() {
  Checker c;
  const auto star = test::make_traj("s", {{0, 0}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}});
  const double r = convergence_radius(star, 5).radius;
  c.expect(std::abs(r - 1.6) <= 1e-12, "hand example gave " + fmt("%.17g", r));

  int wins = 0;
  double reduction_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    testkit::ScenarioSpec spec;
    spec.seed = seed;
    spec.n_cases = 8;
    spec.channels = {"pressure"};
    spec.regimes = {testkit::Regime::Converging, testkit::Regime::Transitioning};
    const double focused = variant_mean_radius(spec);
    spec.variant = testkit::Variant::Diluted;
    const double diluted = variant_mean_radius(spec);
    if (focused < diluted) ++wins;
    reduction_sum += (diluted - focused) / diluted * 100.0;
  }
  c.expect(wins >= 99, "focused smaller in only " + std::to_string(wins) + "/100 seeds");
  return c.done("hand example 1.6; focused smaller in " + std::to_string(wins) + "/100 seeds (mean reduction " +
                fmt("%.1f", reduction_sum / 100.0) + "%)");
}

Outcome top_k() {
  Checker c;
  testkit::ScenarioSpec spec;
  spec.n_cases = 10;
  spec.duplicate_cases = 1;
  spec.channels = {"pressure"};
  spec.regimes = {testkit::Regime::Converging, testkit::Regime::Oscillatory, testkit::Regime::Transitioning,
                  testkit::Regime::Diverging};
  const auto ds = testkit::to_dataset(testkit::generate(spec));
  const auto proj = fit_pca_2d(*ds, "pressure", ds->case_ids());
  const auto trajs = build_all_trajectories(proj.coords, "pressure");
  c.expect(kDefaultTopK == 6, "default k is not 6");
  for (const auto& target : trajs) {
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& other : trajs)
      if (other.case_id != target.case_id)
        expected.emplace_back(trajectory_dissimilarity(target, other).value, other.case_id);
    std::sort(expected.begin(), expected.end());
    const auto got = top_k_similar(proj, target.case_id);
    c.expect(got.size() == 6, "expected 6 results for " + target.case_id);
    for (std::size_t i = 0; i < std::min<std::size_t>(6, got.size()); ++i)
      c.expect(got[i].case_id == expected[i].second && got[i].value == expected[i].first,
               "ranking differs for " + target.case_id);
  }
  const auto dup = top_k_similar(proj, "case_009");
  c.expect(!dup.empty() && dup[0].case_id == "case_000" && dup[0].value == 0.0, "duplicate does not rank first");
  return c.done("10-case fixture matches exhaustive ranking; duplicate first at 0; k=6");
}

struct LiveServer {
  std::unique_ptr<Service> service;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  LiveServer(const std::filesystem::path& manifest, const std::filesystem::path& cache) {
    ServiceOptions opts;
    opts.dataset = load_dataset(manifest);
    opts.cache_dir = cache;
    opts.vlm.mock = true;
    opts.workers = 2;
    opts.log_requests = false;
    service = std::make_unique<Service>(std::move(opts));
    service->register_routes(server);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }

  std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = {}) {
    httplib::Client cl("127.0.0.1", port);
    cl.set_read_timeout(std::chrono::seconds(60));
    httplib::Result res = method == "GET"   ? cl.Get(path)
                          : method == "PUT" ? cl.Put(path, body.dump(), "application/json")
                                            : cl.Post(path, body.dump(), "application/json");
    if (!res) return {0, json::object()};
    return {res->status, json::parse(res->body, nullptr, false)};
  }
};

Outcome report_pipeline() {
  Checker c;
  test::TempDir dir;
  testkit::ScenarioSpec spec;
  spec.n_cases = 6;
  spec.frames_min = 8;
  spec.frames_max = 14;
  spec.regimes = {testkit::Regime::Converging, testkit::Regime::Transitioning};
  const auto manifest = testkit::write_dataset(testkit::generate(spec), dir / "data");

  // Prompt structure and byte-identical regeneration, library level.
  {
    const auto ds = load_dataset(manifest);
    const auto proj = fit_pca_2d(*ds, "pressure", ds->case_ids());
    ClusterModel model;
    model.id = "acceptance";
    const auto ids = ds->case_ids();
    for (const auto& [k, p] : proj.coords)
      model.labels[k] = static_cast<int>(std::find(ids.begin(), ids.end(), k.case_id) - ids.begin());
    model.cluster_count = static_cast<int>(ids.size());
    model = select_centroids(model, proj.coords);
    AnnotationStore annotations(dir / "ann.jsonl");
    for (int cl = 0; cl < 5; ++cl) annotations.save(model, cl, "expert note " + std::to_string(cl), "e");
    ReportStore reports;
    MockVlmBackend vlm;
    ReportGenerator gen(*ds, proj, model, annotations, reports, vlm);
    const std::size_t k = 3;
    const auto first = gen.generate_frame_report({"case_005", 4}, k);
    const auto req = gen.rebuild_request(first);
    std::size_t images = 0;
    std::vector<std::string> notes;
    for (const auto& part : req.body["messages"][1]["content"]) {
      if (part["type"] == "image_url") ++images;
      else if (part["text"].get<std::string>().rfind("Expert annotation", 0) == 0) notes.push_back(part["text"]);
    }
    c.expect(notes.size() == k, "prompt holds " + std::to_string(notes.size()) + " annotations");
    c.expect(images == k + 1, "prompt holds " + std::to_string(images) + " images");
    for (std::size_t i = 0; i < notes.size() && i < first.context_refs.size(); ++i) {
      c.expect(notes[i].find("expert note " + std::to_string(first.context_refs[i].cluster_id)) != std::string::npos,
               "annotation order differs from context refs");
      if (i > 0) c.expect(first.context_refs[i - 1].distance <= first.context_refs[i].distance, "not ascending");
    }
    const auto second = gen.generate_frame_report({"case_005", 4}, k);
    c.expect(second.text == first.text && second.prompt_sha256 == first.prompt_sha256 &&
                 gen.rebuild_request(second).body.dump() == req.body.dump(),
             "regeneration is not byte-identical");
  }
  {
    AnnotationStore reopened(dir / "ann.jsonl");
    c.expect(reopened.latest_for("acceptance").size() == 5, "annotations lost after reopening");
  }

  // Scripted API session; the second server instance checks persistence.
  std::string cid;
  {
    LiveServer srv(manifest, dir / "cache");
    auto [fs, filtered] = srv.call("GET", "/api/cases?p_min=0.8&p_max=2.1&t_min=565&t_max=830");
    c.expect(fs == 200 && filtered["cases"].size() == 6, "filter step failed");
    json scope = json::array();
    for (const auto& cs : filtered["cases"]) scope.push_back(cs["case_id"]);
    auto [ps, job] = srv.call("POST", "/api/projection", {{"channel", "pressure"}, {"case_ids", scope}});
    c.expect(ps == 202, "projection submit failed");
    const std::string pid = job.value("job_id", "");
    srv.service->jobs().wait(pid);
    auto [gs, proj] = srv.call("GET", "/api/projection/" + pid);
    c.expect(gs == 200 && proj["status"] == "done", "projection not done");
    auto [cs, cluster] = srv.call("POST", "/api/clustering", {{"projection_id", pid}, {"eps", 0.6}, {"min_samples", 3}});
    c.expect(cs == 200 && cluster.value("n_clusters", 0) >= 1, "clustering failed");
    cid = cluster.value("clustering_id", "");
    const int n_clusters = cluster.value("n_clusters", 0);
    for (int cl = 0; cl < std::min(2, n_clusters); ++cl)
      c.expect(srv.call("PUT", "/api/annotation/" + cid + "/" + std::to_string(cl),
                        {{"text", "regime " + std::to_string(cl)}}).first == 200,
               "annotation failed");
    auto [frs, frame] = srv.call("POST", "/api/report/frame", {{"clustering_id", cid}, {"case_id", "case_001"}, {"t_index", 2}});
    c.expect(frs == 200 && !frame.value("text", "").empty(), "frame report failed");
    auto [crs, summary] = srv.call("POST", "/api/report/case", {{"clustering_id", cid}, {"case_id", "case_001"}});
    c.expect(crs == 200 && summary["kind"] == "case", "case report failed");
  }
  {
    LiveServer srv(manifest, dir / "cache");
    auto [as, ann] = srv.call("GET", "/api/annotation/" + cid + "/0");
    c.expect(as == 200 && ann["text"] == "regime 0", "annotation lost across service restart");
    auto [rs, rep] = srv.call("GET", "/api/report/case/" + cid + "/case_001");
    c.expect(rs == 200, "case report lost across service restart");
  }
  return c.done("k=3 prompt with 3 notes and 4 images; byte-identical regeneration; restart-safe; API session ok");
}

Outcome formats() {
  Checker c;
  testkit::Xorshift64Star rng(5150);
  EmbeddingMatrix m;
  m.case_id = "big";
  m.channel = "pressure";
  m.n_frames = 1000;
  m.dim = 768;
  m.values.resize(std::size_t{1000} * 768);
  for (auto& v : m.values) {
    const auto bits = static_cast<std::uint32_t>(rng.next() >> 32);
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) v = static_cast<float>(rng.normal());
  }
  test::TempDir dir;
  write_embedding_file(m, dir / "big.tfv");
  const auto back = read_embedding_file(dir / "big.tfv");
  c.expect(back.n_frames == 1000 && back.dim == 768 &&
               std::memcmp(back.values.data(), m.values.data(), m.values.size() * sizeof(float)) == 0,
           "embedding round trip is not bit-exact");

  testkit::ScenarioSpec spec;
  spec.n_cases = 6;
  const auto ds = testkit::to_dataset(testkit::generate(spec));
  auto ids = [&](ParamFilter f) { return filter_cases(*ds, f); };
  c.expect(ids({{0.8, 0.8}, {565.0, 565.0}, {7.8, 7.8}}) == std::vector<std::string>{"case_000"},
           "lower endpoints not inclusive");
  c.expect(ids({{2.1, 2.1}, {830.0, 830.0}, {14.0, 14.0}}) == std::vector<std::string>{"case_001"},
           "upper endpoints not inclusive");
  c.expect(ids({{0.8, 2.1}, {565.0, 830.0}, {7.8, 14.0}}).size() == 6, "full range drops cases");
  return c.done("1000x768 bit-exact; closed bounds at 0.8/2.1 MPa, 565/830 K, 7.8/14 %");
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double limit_s;  // 0 = no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "DTW dissimilarity vs path enumeration", 30, dtw_oracle},
      {2, "DBSCAN vs textbook oracle", 30, dbscan_oracle},
      {3, "centroid selection", 0, centroid_selection},
      {4, "PCA vs dense eigensolver", 0, pca_oracle},
      {5, "convergence radius", 0, convergence},
      {6, "top-k similar trajectories", 0, top_k},
      {7, "report pipeline (mock VLM)", 60, report_pipeline},
      {8, "file formats and range filter", 0, formats},
  };
  int failures = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_s > 0 && secs >= cr.limit_s && o.pass)
      o = {false, "took " + fmt("%.1f", secs) + " s, limit " + fmt("%.0f", cr.limit_s) + " s"};
    std::cout << "criterion " << cr.number << " [" << cr.name << "]: " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << " (" << fmt("%.2f", secs) << " s)" << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
