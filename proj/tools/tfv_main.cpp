// tfv: analytics service and batch tools for combustion-embedding datasets.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tfv/clustering.hpp"
#include "tfv/digest.hpp"
#include "tfv/error.hpp"
#include "tfv/service.hpp"
#include "tfv/testkit.hpp"
#include "tfv/trajectory.hpp"

namespace {

tfv::ProjectionResult project(const tfv::Dataset& ds, const std::string& channel,
                              const std::string& projection) {
  if (projection == "pca") return tfv::fit_pca_2d(ds, channel, ds.case_ids());
  return tfv::import_external_projection(ds, channel, ds.case_ids(), projection);
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  tfv::write_file_atomic(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tfv - temporal flow-field embedding analytics"};
  app.require_subcommand(1);

  std::string manifest, channel, projection = "pca", out = "-", cache_dir, static_dir, host = "127.0.0.1";
  int port = tfv::kDefaultPort;
  std::size_t k_window = tfv::kDefaultConvergenceWindow;
  std::size_t workers = 0;
  double eps = 0.5;
  std::uint32_t min_samples = 5;
  std::string spec_file, out_dir, labels_out = "labels.csv", centroids_out = "centroids.csv";

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Listen port")->capture_default_str();
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--cache-dir", cache_dir, "Projection cache and annotation/report stores");
  serve->add_option("--static-dir", static_dir, "Built frontend assets to serve at /");
  serve->add_option("--workers", workers, "Job pool size (0 = all cores)");

  auto* sim = app.add_subcommand("similarity-matrix", "Pairwise trajectory dissimilarity matrix");
  sim->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  sim->add_option("--channel", channel)->required();
  sim->add_option("--projection", projection, "pca or a case_id,t_index,x,y file")->capture_default_str();
  sim->add_option("--out", out, "Output CSV ('-' for stdout)")->capture_default_str();

  auto* conv = app.add_subcommand("convergence", "Per-case convergence radius");
  conv->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  conv->add_option("--channel", channel)->required();
  conv->add_option("--projection", projection, "pca or a case_id,t_index,x,y file")->capture_default_str();
  conv->add_option("--k", k_window, "Tail window size")->capture_default_str()->check(CLI::PositiveNumber);
  conv->add_option("--out", out)->capture_default_str();

  auto* clus = app.add_subcommand("cluster", "DBSCAN over a projection; writes labels and centroids");
  clus->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  clus->add_option("--channel", channel)->required();
  clus->add_option("--projection", projection)->capture_default_str();
  clus->add_option("--eps", eps)->required()->check(CLI::PositiveNumber);
  clus->add_option("--min-samples", min_samples)->required()->check(CLI::PositiveNumber);
  clus->add_option("--labels-out", labels_out)->capture_default_str();
  clus->add_option("--centroids-out", centroids_out)->capture_default_str();

  auto* gen = app.add_subcommand("generate-fixture", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_file, "Scenario spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      tfv::ServiceOptions opts;
      opts.dataset = tfv::load_dataset(manifest);
      if (!cache_dir.empty()) opts.cache_dir = cache_dir;
      if (!static_dir.empty()) opts.static_dir = static_dir;
      opts.vlm = tfv::VlmConfig::from_env();
      opts.workers = workers;
      tfv::run_server(std::move(opts), host, port);
    } else if (*sim) {
      auto ds = tfv::load_dataset(manifest);
      const auto proj = project(*ds, channel, projection);
      const auto m = tfv::similarity_matrix(proj);
      for (const auto& id : m.excluded)
        std::cerr << "warning: case " << id << " has fewer than 2 frames; excluded\n";
      write_text(out, tfv::format_similarity_csv(m));
    } else if (*conv) {
      auto ds = tfv::load_dataset(manifest);
      const auto proj = project(*ds, channel, projection);
      std::ostringstream csv;
      csv.precision(17);
      csv << "case_id,k,radius,tail_x,tail_y\n";
      for (const auto& t : tfv::build_all_trajectories(proj.coords, channel)) {
        const auto s = tfv::convergence_radius(t, k_window);
        csv << t.case_id << ',' << k_window << ',' << s.radius << ',' << s.tail_mean.x << ','
            << s.tail_mean.y << '\n';
      }
      write_text(out, csv.str());
    } else if (*clus) {
      auto ds = tfv::load_dataset(manifest);
      const auto proj = project(*ds, channel, projection);
      const auto model = tfv::select_centroids(tfv::dbscan(proj, eps, min_samples), proj.coords);
      write_text(labels_out, tfv::format_labels_csv(model));
      write_text(centroids_out, tfv::format_centroids_csv(model));
      std::cerr << model.cluster_count << " clusters\n";
    } else if (*gen) {
      std::ifstream in(spec_file);
      const auto spec = tfv::testkit::scenario_from_json(nlohmann::json::parse(in));
      const auto path = tfv::testkit::write_dataset(tfv::testkit::generate(spec), out_dir);
      std::cout << path.string() << '\n';
    }
  } catch (const tfv::Error& e) {
    std::cerr << tfv::to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
