#include "clusterprobe/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clusterprobe/binary_io.hpp"
#include "clusterprobe/dataset.hpp"
#include "clusterprobe/disentangle.hpp"
#include "clusterprobe/hash.hpp"
#include "clusterprobe/kernels.hpp"
#include "clusterprobe/metrics.hpp"
#include "clusterprobe/probe.hpp"
#include "clusterprobe/random.hpp"
#include "clusterprobe/report.hpp"
#include "clusterprobe/synth.hpp"
#include "clusterprobe/tsne.hpp"

namespace clusterprobe::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// CLI11 only reads config files on the top-level app, so a subcommand's
// --config is expanded here into ordinary flags. Keys already given on the
// command line are skipped. Throws CLI::ParseError subclasses.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (!path) return kept;

  Json j;
  try {
    j = Json::parse(io::read_file_text(*path));
  } catch (const Json::exception& e) {
    throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
  } catch (const Error& e) {
    throw CLI::FileError(e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");

  auto given = [&](const std::string& flag) {
    return std::any_of(kept.begin(), kept.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  auto scalar = [](const Json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) kept.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        kept.push_back(flag);
        kept.push_back(scalar(v));
      }
    } else if (value.is_null() || value.is_object()) {
      throw CLI::ConversionError("config key \"" + key + "\" must be a scalar or list");
    } else {
      kept.push_back(flag);
      kept.push_back(scalar(value));
    }
  }
  return kept;
}

struct Common {
  std::string config;  // consumed by expand_config, listed for --help
  std::uint64_t seed = 0;
  int threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config, "JSON file with flag values; command-line flags win");
  sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", common.threads, "Upper bound on worker threads (0 = all)")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("--quiet", common.quiet, "Suppress progress output");
}

const std::vector<std::string> kSpaces = {"raw", "s", "t"};
const std::vector<std::string> kSplitNames = {"train", "validation", "test"};

EmbeddingDataset load_prepared(const fs::path& dir, bool normalize) {
  EmbeddingDataset d = load_dataset(dir);
  if (normalize && !d.normalized()) return l2_normalize(d);
  return d;
}

// sha256 over manifest, image and text binaries in that order.
std::string dataset_hash(const fs::path& dir) {
  const auto manifest = Json::parse(io::read_file_text(dir / "manifest.json"));
  std::vector<std::uint8_t> all = io::read_file_bytes(dir / "manifest.json");
  for (const char* key : {"image_file", "text_file"}) {
    const auto part = io::read_file_bytes(dir / manifest.at(key).get<std::string>());
    all.insert(all.end(), part.begin(), part.end());
  }
  return sha256_hex(all);
}

std::optional<Json> read_sidecar(const fs::path& artifact) {
  const fs::path path = artifact.string() + ".json";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  return Json::parse(io::read_file_text(path));
}

void write_json(const fs::path& path, const Json& j) {
  io::write_file_text(path, j.dump(2) + "\n");
}

Json history_json(const TrainHistory& history) {
  Json arr = Json::array();
  for (const auto& e : history.epochs) {
    Json j;
    j["epoch"] = e.epoch;
    j["mean_l_t"] = e.mean_l_t;
    j["mean_l_s"] = e.mean_l_s;
    j["style_l_c"] = e.style_terms.l_cluster;
    j["style_l_fr"] = e.style_terms.l_real_fake;
    j["semantics_l_c"] = e.semantics_terms.l_cluster;
    j["semantics_l_fr"] = e.semantics_terms.l_real_fake;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string escape_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(9);
  ss << v;
  return ss.str();
}

void write_svg(const fs::path& path, const MatrixD& coords,
               const std::vector<Authenticity>& labels) {
  double min_x = coords(0, 0), max_x = min_x, min_y = coords(0, 1), max_y = min_y;
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    min_x = std::min(min_x, coords(i, 0));
    max_x = std::max(max_x, coords(i, 0));
    min_y = std::min(min_y, coords(i, 1));
    max_y = std::max(max_y, coords(i, 1));
  }
  const double size = 800.0;
  const double margin = 20.0;
  const double sx = (size - 2 * margin) / std::max(max_x - min_x, 1e-12);
  const double sy = (size - 2 * margin) / std::max(max_y - min_y, 1e-12);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\">\n"
      << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const double x = margin + (coords(i, 0) - min_x) * sx;
    const double y = size - margin - (coords(i, 1) - min_y) * sy;
    const char* color = labels[i] == Authenticity::kReal ? "#1f4fd1" : "#d12a1f";
    svg << "<circle cx=\"" << format_double(x) << "\" cy=\"" << format_double(y)
        << "\" r=\"3\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
  }
  svg << "</svg>\n";
  io::write_file_text(path, svg.str());
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args);

 private:
  void log(const std::string& line) {
    if (!common_.quiet) out_ << line << "\n";
  }
  const HeadPair* heads_for(const std::string& space, const std::string& model_path);

  int do_validate();
  int do_synth();
  int do_train();
  int do_probe();
  int do_eval();
  int do_tsne();

  std::ostream& out_;
  std::ostream& err_;
  Common common_;
  std::optional<HeadPair> heads_;

  std::string data_;
  std::string out_path_;
  std::string model_;
  std::string space_ = "raw";
  std::string split_ = "validation";
  bool no_normalize_ = false;

  SynthConfig synth_;
  TrainConfig train_;
  double lambda_ = kDefaultProbeLambda;
  bool sweep_ = false;
  SolverOptions solver_;
  std::string probe_path_;
  std::string report_path_;
  TsneConfig tsne_;
  std::size_t subsample_ = 0;
  std::string svg_path_;
};

const HeadPair* Runner::heads_for(const std::string& space, const std::string& model_path) {
  if (space == "raw") return nullptr;
  heads_ = load_heads(model_path);
  return &*heads_;
}

int Runner::run(const std::vector<std::string>& args) {
  CLI::App app{"clusterprobe: style/semantics analysis of clustered real and fake embeddings",
               "clusterprobe"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "Load a dataset directory and check every invariant");
  validate->add_option("--data", data_, "Dataset directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic clustered dataset");
  synth->add_option("--clusters", synth_.clusters, "Number of clusters K")->capture_default_str();
  synth->add_option("--fakes", synth_.fakes_per_cluster, "Fakes per cluster N")->capture_default_str();
  synth->add_option("--dim", synth_.dim, "Embedding dimension D")->capture_default_str();
  synth->add_option("--style-offset", synth_.style_offset, "Fake-only style shift")->capture_default_str();
  synth->add_option("--noise", synth_.semantic_noise, "Per-image noise scale")->capture_default_str();
  synth->add_option("--caption-noise", synth_.caption_noise, "Per-caption noise scale")->capture_default_str();
  synth->add_option("--out", out_path_, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train the style (T) and semantics (S) heads");
  train->add_option("--data", data_, "Dataset directory")->required();
  train->add_option("--epochs", train_.epochs)->capture_default_str();
  train->add_option("--batch", train_.batch_size)->capture_default_str();
  train->add_option("--lr", train_.learning_rate)->capture_default_str();
  train->add_option("--tau", train_.temperature, "Contrastive temperature")->capture_default_str();
  train->add_option("--wd", train_.weight_decay, "AdamW weight decay")->capture_default_str();
  train->add_option("--beta1", train_.beta1)->capture_default_str();
  train->add_option("--beta2", train_.beta2)->capture_default_str();
  train->add_option("--eps", train_.epsilon)->capture_default_str();
  train->add_option("--out", out_path_, "Model file")->required();
  train->add_flag("--no-normalize", no_normalize_, "Use rows as stored");

  auto* probe = app.add_subcommand("probe", "Fit the real/fake logistic probe");
  probe->add_option("--data", data_, "Dataset directory")->required();
  probe->add_option("--space", space_, "Feature space")->check(CLI::IsMember(kSpaces))->capture_default_str();
  probe->add_option("--model", model_, "Model file with T and S heads");
  probe->add_option("--lambda", lambda_, "L2 penalty")->capture_default_str();
  probe->add_flag("--sweep", sweep_, "Pick lambda on the validation split");
  probe->add_option("--tol", solver_.gradient_tolerance, "Gradient-norm tolerance")->capture_default_str();
  probe->add_option("--max-iter", solver_.max_iterations, "Solver iteration cap")->capture_default_str();
  probe->add_option("--out", out_path_, "Probe file")->required();
  probe->add_flag("--no-normalize", no_normalize_, "Use rows as stored");

  auto* eval = app.add_subcommand("eval", "Compute all metrics for one split");
  eval->add_option("--data", data_, "Dataset directory")->required();
  eval->add_option("--split", split_)->check(CLI::IsMember({"validation", "test"}))->capture_default_str();
  eval->add_option("--space", space_)->check(CLI::IsMember(kSpaces))->capture_default_str();
  eval->add_option("--model", model_, "Model file with T and S heads");
  eval->add_option("--probe", probe_path_, "Probe file")->required();
  eval->add_option("--report", report_path_, "Report JSON path")->required();
  eval->add_flag("--no-normalize", no_normalize_, "Use rows as stored");

  auto* tsne = app.add_subcommand("tsne", "2-D t-SNE coordinates for one split");
  tsne->add_option("--data", data_, "Dataset directory")->required();
  tsne->add_option("--split", split_)->check(CLI::IsMember(kSplitNames))->capture_default_str();
  tsne->add_option("--space", space_)->check(CLI::IsMember(kSpaces))->capture_default_str();
  tsne->add_option("--model", model_, "Model file with T and S heads");
  tsne->add_option("--subsample", subsample_, "Keep at most M points, whole clusters")->capture_default_str();
  tsne->add_option("--perplexity", tsne_.perplexity)->capture_default_str();
  tsne->add_option("--iterations", tsne_.iterations)->capture_default_str();
  tsne->add_option("--learning-rate", tsne_.learning_rate)->capture_default_str();
  tsne->add_option("--out", out_path_, "Output CSV")->required();
  tsne->add_option("--svg", svg_path_, "Optional SVG scatter plot");
  tsne->add_flag("--no-normalize", no_normalize_, "Use rows as stored");

  for (auto* sub : {validate, synth, train, probe, eval, tsne}) add_common(sub, common_);

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_, err_);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (auto* sub : {probe, eval, tsne}) {
    if (sub->parsed() && space_ != "raw" && model_.empty()) {
      err_ << sub->get_name() << ": --space " << space_ << " requires --model\n";
      return kExitUsage;
    }
  }

  kernels::set_thread_count(common_.threads);
  try {
    if (validate->parsed()) return do_validate();
    if (synth->parsed()) return do_synth();
    if (train->parsed()) return do_train();
    if (probe->parsed()) return do_probe();
    if (eval->parsed()) return do_eval();
    if (tsne->parsed()) return do_tsne();
  } catch (const Error& e) {
    err_ << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err_ << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int Runner::do_validate() {
  const EmbeddingDataset d = load_dataset(data_);
  Json j;
  j["dim"] = d.dim();
  j["image_rows"] = d.images().rows();
  j["text_rows"] = d.texts().rows();
  j["normalized"] = d.normalized();
  for (Split s : kAllSplits) j["clusters"][std::string(split_name(s))] = d.clusters(s).size();
  log(j.dump());
  return kExitOk;
}

int Runner::do_synth() {
  synth_.seed = common_.seed;
  const EmbeddingDataset d = generate_synthetic(synth_);
  save_dataset(d, out_path_);
  Json j;
  j["clusters"] = synth_.clusters;
  j["fakes_per_cluster"] = synth_.fakes_per_cluster;
  j["dim"] = synth_.dim;
  j["style_offset"] = synth_.style_offset;
  j["semantic_noise"] = synth_.semantic_noise;
  j["caption_noise"] = synth_.caption_noise;
  j["seed"] = synth_.seed;
  log(j.dump());
  return kExitOk;
}

int Runner::do_train() {
  train_.seed = common_.seed;
  const EmbeddingDataset d = load_prepared(data_, !no_normalize_);
  const TrainResult result = train_disentangle(d, train_);
  save_heads(result.heads, out_path_);

  Json j;
  j["data_sha256"] = dataset_hash(data_);
  j["normalize"] = !no_normalize_;
  j["epochs"] = train_.epochs;
  j["batch_size"] = train_.batch_size;
  j["learning_rate"] = train_.learning_rate;
  j["beta1"] = train_.beta1;
  j["beta2"] = train_.beta2;
  j["epsilon"] = train_.epsilon;
  j["weight_decay"] = train_.weight_decay;
  j["tau"] = train_.temperature;
  j["seed"] = train_.seed;
  j["history"] = history_json(result.history);
  write_json(out_path_ + ".json", j);
  for (const auto& e : result.history.epochs) {
    log("epoch " + std::to_string(e.epoch) + " L_T " + format_double(e.mean_l_t) +
        " L_S " + format_double(e.mean_l_s));
  }
  return kExitOk;
}

int Runner::do_probe() {
  const EmbeddingDataset d = load_prepared(data_, !no_normalize_);
  const FeatureSpace space = parse_space(space_);
  const HeadPair* heads = heads_for(space_, model_);
  const ProbeModel model = sweep_ ? sweep_probe(d, space, heads, common_.seed, solver_)
                                  : fit_probe(d, space, heads, lambda_, common_.seed, solver_);
  save_probe(model, out_path_);

  Json j;
  j["data_sha256"] = dataset_hash(data_);
  j["model_sha256"] = model_.empty() ? Json(nullptr) : Json(sha256_file(model_));
  j["space"] = space_;
  j["normalize"] = !no_normalize_;
  j["lambda"] = model.lambda;
  j["sweep"] = sweep_;
  j["tolerance"] = solver_.gradient_tolerance;
  j["max_iterations"] = solver_.max_iterations;
  j["seed"] = common_.seed;
  write_json(out_path_ + ".json", j);
  log("probe lambda " + format_double(model.lambda) + " written to " + out_path_);
  return kExitOk;
}

int Runner::do_eval() {
  const EmbeddingDataset d = load_prepared(data_, !no_normalize_);
  const FeatureSpace space = parse_space(space_);
  const ProbeModel probe = load_probe(probe_path_);
  if (probe.space != space) {
    throw Error("cli", "probe was fitted in space " + std::string(space_name(probe.space)) +
                           " but --space is " + space_);
  }
  const HeadPair* heads = heads_for(space_, model_);
  MetricReport report = evaluate(d, parse_split(split_), probe, heads);

  const auto probe_meta = read_sidecar(probe_path_);
  const auto model_meta = model_.empty() ? std::nullopt : read_sidecar(model_);
  Json& c = report.config;
  c["split"] = split_;
  c["space"] = space_;
  c["seed"] = common_.seed;
  c["normalize"] = !no_normalize_;
  c["distance"] = "cosine";
  c["probe_threshold"] = 0.0;
  c["tau"] = model_meta ? (*model_meta)["tau"] : Json(nullptr);
  c["weight_decay"] = model_meta ? (*model_meta)["weight_decay"] : Json(nullptr);
  c["train_seed"] = model_meta ? (*model_meta)["seed"] : Json(nullptr);
  c["lambda"] = probe_meta ? (*probe_meta)["lambda"] : Json(nullptr);
  c["probe_seed"] = probe_meta ? (*probe_meta)["seed"] : Json(nullptr);
  c["data_sha256"] = dataset_hash(data_);
  c["model_sha256"] = model_.empty() ? Json(nullptr) : Json(sha256_file(model_));
  c["probe_sha256"] = sha256_file(probe_path_);

  const Json j = to_json(report);
  write_json(report_path_, j);
  log(j.dump(2));
  return kExitOk;
}

int Runner::do_tsne() {
  tsne_.seed = common_.seed;
  const EmbeddingDataset d = load_prepared(data_, !no_normalize_);
  const Split split = parse_split(split_);
  const HeadPair* heads = heads_for(space_, model_);
  const auto clusters = d.clusters(split);

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  if (subsample_ > 0) {
    Rng rng(common_.seed, 0x5ab5);
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<std::size_t> rows;
  std::vector<Authenticity> labels;
  std::vector<const std::string*> ids;
  for (std::size_t index : order) {
    const auto& c = clusters[index];
    if (subsample_ > 0 && rows.size() + c.member_count() > subsample_) continue;
    rows.push_back(c.real_row);
    labels.push_back(Authenticity::kReal);
    ids.push_back(&c.cluster_id);
    for (std::size_t r : c.fake_rows) {
      rows.push_back(r);
      labels.push_back(Authenticity::kFake);
      ids.push_back(&c.cluster_id);
    }
  }

  const MatrixD features = space_features(d, rows, parse_space(space_), heads);
  const TsneResult result = tsne_embed(features, tsne_);

  std::ostringstream csv;
  csv << "# perplexity=" << format_double(tsne_.perplexity)
      << " iterations=" << tsne_.iterations
      << " learning_rate=" << format_double(tsne_.learning_rate)
      << " exaggeration=" << format_double(tsne_.exaggeration) << "x"
      << tsne_.exaggeration_iterations << " momentum=" << format_double(tsne_.initial_momentum)
      << "/" << format_double(tsne_.final_momentum) << "@" << tsne_.momentum_switch
      << " seed=" << tsne_.seed << " split=" << split_ << " space=" << space_
      << " subsample=" << subsample_
      << " final_kl=" << format_double(result.kl_trace.back().kl) << "\n";
  csv << "row,label,cluster_id,x,y\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << rows[i] << ',' << (labels[i] == Authenticity::kReal ? "real" : "fake") << ','
        << escape_csv(*ids[i]) << ',' << format_double(result.coordinates(i, 0)) << ','
        << format_double(result.coordinates(i, 1)) << "\n";
  }
  io::write_file_text(out_path_, csv.str());
  if (!svg_path_.empty()) write_svg(svg_path_, result.coordinates, labels);
  log("t-SNE of " + std::to_string(rows.size()) + " points written to " + out_path_);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace clusterprobe::cli
