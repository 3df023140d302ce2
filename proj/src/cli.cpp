#include "mmhash/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "mmhash/baseline_cmssh.hpp"
#include "mmhash/data.hpp"
#include "mmhash/error.hpp"
#include "mmhash/format.hpp"
#include "mmhash/hashing.hpp"
#include "mmhash/retrieval.hpp"
#include "mmhash/rng.hpp"
#include "mmhash/trainer.hpp"

namespace mmhash::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string config;
};

struct PairSizeOptions {
  PairSetSizes sizes{10000, 50000, 10000, 50000, 10000, 50000};
  double cross_fraction = 1.0;

  void bind(CLI::App* cmd) {
    cmd->add_option("--pos-x", sizes.pos_x, "X-X positive pairs")->capture_default_str();
    cmd->add_option("--neg-x", sizes.neg_x, "X-X negative pairs")->capture_default_str();
    cmd->add_option("--pos-y", sizes.pos_y, "Y-Y positive pairs")->capture_default_str();
    cmd->add_option("--neg-y", sizes.neg_y, "Y-Y negative pairs")->capture_default_str();
    cmd->add_option("--pos-xy", sizes.pos_xy, "X-Y positive pairs")->capture_default_str();
    cmd->add_option("--neg-xy", sizes.neg_xy, "X-Y negative pairs")->capture_default_str();
    cmd->add_option("--cross-fraction", cross_fraction,
                    "fraction of X-Y pairs kept after sampling")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }

  PairSets build(const FeatureMatrix& x, const FeatureMatrix& y, std::uint64_t seed) const {
    PairSets p = build_pairsets(x.require_labels(), y.require_labels(), sizes, seed);
    if (cross_fraction < 1.0)
      p.cross = subsample(p.cross, cross_fraction, derive_seed(seed, "cross_fraction"));
    return p;
  }
};

struct LossOptions {
  LossConfig cfg;

  void bind(CLI::App* cmd) {
    cmd->add_option("--alpha-x", cfg.alpha_x, "weight of the X-X loss")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--alpha-y", cfg.alpha_y, "weight of the Y-Y loss")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--mx", cfg.margin_x, "X-X margin")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--my", cfg.margin_y, "Y-Y margin")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--mxy", cfg.margin_xy, "X-Y margin")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
  }
};

struct NetOptions {
  std::size_t bits = 16;
  std::size_t layers = 1;
  std::size_t hidden = 128;
  double beta = 1.0;

  void bind(CLI::App* cmd) {
    cmd->add_option("--bits", bits, "hash length m")->check(CLI::Range(1, 256))->capture_default_str();
    cmd->add_option("--layers", layers, "1 or 2")->check(CLI::Range(1, 2))->capture_default_str();
    cmd->add_option("--hidden", hidden, "hidden width of 2-layer nets")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--beta", beta, "tanh sharpness")->check(CLI::PositiveNumber)->capture_default_str();
  }

  CoupledModel init(std::size_t dim_x, std::size_t dim_y, std::uint64_t seed) const {
    const auto dx = layer_dims(dim_x, bits, layers, hidden);
    const auto dy = layer_dims(dim_y, bits, layers, hidden);
    return CoupledModel(init_random(dx, beta, derive_seed(seed, "init_x")),
                        init_random(dy, beta, derive_seed(seed, "init_y")));
  }
};

struct EvalCliOptions {
  std::string query_x, query_y, db_x, db_y, csv_prefix;
  std::size_t top_r = 0;
  bool exclude_self = false;
  bool unnormalized = false;

  void bind(CLI::App* cmd, bool required) {
    auto* dbx = cmd->add_option("--db-x", db_x, "database features, modality X");
    auto* dby = cmd->add_option("--db-y", db_y, "database features, modality Y");
    if (required) {
      dbx->required();
      dby->required();
    }
    cmd->add_option("--query-x", query_x, "query features, modality X (default: --db-x)");
    cmd->add_option("--query-y", query_y, "query features, modality Y (default: --db-y)");
    cmd->add_option("--top-r", top_r, "ranked list length R (0 = whole database)")
        ->capture_default_str();
    cmd->add_flag("--exclude-self", exclude_self, "drop the query's own id from its ranking");
    cmd->add_flag("--unnormalized-ap", unnormalized,
                  "AP as the bare sum of P(r) rel(r), without dividing by #relevant");
    cmd->add_option("--csv-prefix", csv_prefix,
                    "write <prefix>_<direction>.csv per-query reports");
  }
};

std::vector<std::uint64_t> row_ids(std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

void check_dims(const CoupledModel& model, const FeatureMatrix& x, const FeatureMatrix& y) {
  if (x.dim() != model.net_x.input_dim() || y.dim() != model.net_y.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "model expects " + std::to_string(model.net_x.input_dim()) + "/" +
                    std::to_string(model.net_y.input_dim()) + " features, data has " +
                    std::to_string(x.dim()) + "/" + std::to_string(y.dim()));
}

void run_evaluation(const CoupledModel& model, const EvalCliOptions& o, std::ostream& out) {
  const FeatureMatrix db_x = load_features(o.db_x);
  const FeatureMatrix db_y = load_features(o.db_y);
  const FeatureMatrix q_x = o.query_x.empty() ? db_x : load_features(o.query_x);
  const FeatureMatrix q_y = o.query_y.empty() ? db_y : load_features(o.query_y);
  check_dims(model, db_x, db_y);
  check_dims(model, q_x, q_y);

  const auto codes_db_x = hash_rows(model.net_x, db_x.values);
  const auto codes_db_y = hash_rows(model.net_y, db_y.values);
  const auto codes_q_x = hash_rows(model.net_x, q_x.values);
  const auto codes_q_y = hash_rows(model.net_y, q_y.values);
  const HashIndex index_x(codes_db_x, db_x.require_labels());
  const HashIndex index_y(codes_db_y, db_y.require_labels());

  EvalOptions eo;
  eo.top_r = o.top_r;
  eo.exclude_self = o.exclude_self;
  eo.normalized_ap = !o.unnormalized;

  struct Direction {
    const char* name;
    const std::vector<HashCode>& queries;
    const FeatureMatrix& query_features;
    const HashIndex& db;
  };
  const Direction directions[] = {{"x2y", codes_q_x, q_x, index_y},
                                  {"y2x", codes_q_y, q_y, index_x},
                                  {"x2x", codes_q_x, q_x, index_x},
                                  {"y2y", codes_q_y, q_y, index_y}};
  out << std::fixed << std::setprecision(6);
  for (const Direction& d : directions) {
    const auto ids = row_ids(d.queries.size());
    const DirectionReport rep = evaluate_direction(d.name, d.queries,
                                                   d.query_features.require_labels(), ids, d.db, eo);
    out << rep.name << " mAP=" << rep.map << " P@1=" << rep.p_at_1 << " P@5=" << rep.p_at_5
        << " P@10=" << rep.p_at_10 << '\n';
    if (!o.csv_prefix.empty()) {
      const std::string path = o.csv_prefix + "_" + rep.name + ".csv";
      std::ofstream os(path);
      if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
      write_report_csv(os, rep);
    }
  }
}

// --config FILE: key=value lines become --key value arguments placed before
// the explicit ones, so the command line wins on conflicts.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       std::string& config_path) {
  std::vector<std::string> explicit_args;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      explicit_args.push_back(args[i]);
    }
  }
  if (config_path.empty() || explicit_args.empty()) return args;
  std::ifstream is(config_path);
  if (!is) throw Error(ErrorCode::Io, "cannot open config " + config_path);
  std::vector<std::string> expanded{explicit_args.front()};  // the subcommand
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw Error(ErrorCode::Parse, config_path + " line " + std::to_string(lineno) +
                                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value == "true") {
      expanded.push_back("--" + key);
    } else if (value != "false") {
      expanded.push_back("--" + key);
      expanded.push_back(value);
    }
  }
  expanded.insert(expanded.end(), explicit_args.begin() + 1, explicit_args.end());
  return expanded;
}

void echo_config(const std::string& config_path, const std::string& output_path) {
  if (config_path.empty() || output_path.empty()) return;
  fs::path dir = fs::path(output_path).parent_path();
  if (dir.empty()) dir = ".";
  fs::copy_file(config_path, dir / "run_config.txt", fs::copy_options::overwrite_existing);
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::string config_path;
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args, config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"Multimodal similarity-preserving hashing with coupled siamese networks", "mmhash"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  std::string primary_output;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "master seed")->capture_default_str();
    cmd->add_flag("--deterministic", common.deterministic,
                  "fixed-order reductions (always on; recorded for provenance)");
    cmd->add_option("--config", common.config, "key=value file of long options");
  };

  // synthesize --------------------------------------------------------------
  SyntheticSpec spec;
  std::string shape = "gaussian", out_x, out_y, test_out_x, test_out_y;
  std::size_t test_per_class = 0;
  auto* synth = app.add_subcommand("synthesize", "generate a labelled two-modality benchmark");
  synth->add_option("--classes", spec.n_classes)->capture_default_str();
  synth->add_option("--per-class", spec.samples_per_class)->capture_default_str();
  synth->add_option("--dim-x", spec.dim_x)->capture_default_str();
  synth->add_option("--dim-y", spec.dim_y)->capture_default_str();
  synth->add_option("--spread", spec.cluster_spread)->capture_default_str();
  synth->add_option("--consistency", spec.cross_modal_consistency)->capture_default_str();
  synth->add_option("--center-scale", spec.center_scale)->capture_default_str();
  synth->add_option("--shape", shape)->check(CLI::IsMember({"gaussian", "shells"}))->capture_default_str();
  synth->add_option("--out-x", out_x)->required();
  synth->add_option("--out-y", out_y)->required();
  synth->add_option("--test-per-class", test_per_class, "also write a held-out split");
  synth->add_option("--test-out-x", test_out_x);
  synth->add_option("--test-out-y", test_out_y);
  add_common(synth);

  // pairs -------------------------------------------------------------------
  std::string feat_x, feat_y, pairs_path;
  PairSizeOptions pair_opts;
  auto* pairs_cmd = app.add_subcommand("pairs", "sample the six training pair sets from labels");
  pairs_cmd->add_option("--x", feat_x, "features of modality X (labels in <path>.labels)")->required();
  pairs_cmd->add_option("--y", feat_y, "features of modality Y")->required();
  pairs_cmd->add_option("--out", pairs_path, "MMHP1 output")->required();
  pair_opts.bind(pairs_cmd);
  add_common(pairs_cmd);

  // train -------------------------------------------------------------------
  NetOptions net_opts;
  LossOptions loss_opts;
  TrainConfig train_cfg;
  std::string optimizer = "cg", model_out;
  auto* train_cmd = app.add_subcommand("train", "train the coupled hashing networks");
  train_cmd->add_option("--x", feat_x)->required();
  train_cmd->add_option("--y", feat_y)->required();
  train_cmd->add_option("--pairs", pairs_path, "MMHP1 pairs (default: sample from labels)");
  pair_opts.bind(train_cmd);
  net_opts.bind(train_cmd);
  loss_opts.bind(train_cmd);
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"cg", "sgd"}))->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.max_epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", train_cfg.momentum)->capture_default_str();
  train_cmd->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--tolerance", train_cfg.tolerance)->capture_default_str();
  train_cmd->add_option("--model-out", model_out)->required();
  train_cmd->add_option("--trace", train_cfg.trace_path, "epoch,loss CSV");
  add_common(train_cmd);

  // hash --------------------------------------------------------------------
  std::string model_path, features_path, modality = "x", codes_out;
  auto* hash_cmd = app.add_subcommand("hash", "binarize features with a trained model");
  hash_cmd->add_option("--model", model_path)->required();
  hash_cmd->add_option("--features", features_path)->required();
  hash_cmd->add_option("--modality", modality)->check(CLI::IsMember({"x", "y"}))->capture_default_str();
  hash_cmd->add_option("--out", codes_out, "MMHC1 output")->required();
  add_common(hash_cmd);

  // retrieve ----------------------------------------------------------------
  std::string queries_path, database_path, retrieve_out;
  std::size_t k = 10;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "rank a database of codes for each query code");
  retrieve_cmd->add_option("--queries", queries_path, "MMHC1")->required();
  retrieve_cmd->add_option("--database", database_path, "MMHC1")->required();
  retrieve_cmd->add_option("--k", k)->check(CLI::PositiveNumber)->capture_default_str();
  retrieve_cmd->add_option("--out", retrieve_out, "CSV (default: stdout)");
  add_common(retrieve_cmd);

  // evaluate ----------------------------------------------------------------
  EvalCliOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "mAP and precision@{1,5,10} in four directions");
  eval_cmd->add_option("--model", model_path)->required();
  eval_opts.bind(eval_cmd, true);
  add_common(eval_cmd);

  // baseline ----------------------------------------------------------------
  std::size_t grid = 32;
  auto* base_cmd = app.add_subcommand("baseline", "fit the boosted CM-SSH baseline");
  base_cmd->add_option("--x", feat_x)->required();
  base_cmd->add_option("--y", feat_y)->required();
  base_cmd->add_option("--pairs", pairs_path, "MMHP1 pairs (default: sample from labels)");
  pair_opts.bind(base_cmd);
  base_cmd->add_option("--bits", net_opts.bits)->check(CLI::Range(1, 256))->capture_default_str();
  base_cmd->add_option("--grid", grid, "threshold candidates per axis")->check(CLI::Range(2, 4096))->capture_default_str();
  base_cmd->add_option("--model-out", model_out)->required();
  eval_opts.bind(base_cmd, false);
  add_common(base_cmd);

  // gradcheck ---------------------------------------------------------------
  double step = 1e-6, threshold = 1e-5;
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  grad_cmd->add_option("--x", feat_x)->required();
  grad_cmd->add_option("--y", feat_y)->required();
  grad_cmd->add_option("--pairs", pairs_path, "MMHP1 pairs (default: sample from labels)");
  grad_cmd->add_option("--model", model_path, "MMHM1 model (default: random init)");
  pair_opts.bind(grad_cmd);
  net_opts.bind(grad_cmd);
  loss_opts.bind(grad_cmd);
  grad_cmd->add_option("--step", step)->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--threshold", threshold)->capture_default_str();
  add_common(grad_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto load_pairs_or_sample = [&](const FeatureMatrix& x, const FeatureMatrix& y) {
    if (!pairs_path.empty()) return load_pairs(pairs_path);
    return pair_opts.build(x, y, derive_seed(common.seed, "pairs"));
  };

  try {
    if (synth->parsed()) {
      spec.seed = common.seed;
      spec.shape = shape == "shells" ? ClusterShape::Shells : ClusterShape::Gaussian;
      if (test_per_class > 0) {
        if (test_out_x.empty() || test_out_y.empty())
          throw Error(ErrorCode::InvalidArgument, "--test-per-class needs --test-out-x/--test-out-y");
        const SyntheticSplit split = synthesize_split(spec, test_per_class);
        save_features(out_x, split.train.x);
        save_features(out_y, split.train.y);
        save_features(test_out_x, split.test.x);
        save_features(test_out_y, split.test.y);
      } else {
        const SyntheticData d = synthesize(spec);
        save_features(out_x, d.x);
        save_features(out_y, d.y);
      }
      primary_output = out_x;
      out << "wrote " << spec.n_classes * spec.samples_per_class << " samples per modality\n";
    } else if (pairs_cmd->parsed()) {
      const FeatureMatrix x = load_features(feat_x);
      const FeatureMatrix y = load_features(feat_y);
      const PairSets p = pair_opts.build(x, y, derive_seed(common.seed, "pairs"));
      save_pairs(pairs_path, p);
      primary_output = pairs_path;
      out << "pairs xx=" << p.intra_x.size() << " yy=" << p.intra_y.size()
          << " xy=" << p.cross.size() << '\n';
    } else if (train_cmd->parsed()) {
      loss_opts.cfg.validate(net_opts.bits);
      train_cfg.optimizer = optimizer == "sgd" ? Optimizer::Sgd : Optimizer::ConjugateGradient;
      train_cfg.seed = derive_seed(common.seed, "train");
      train_cfg.deterministic = common.deterministic;
      train_cfg.validate();
      const FeatureMatrix x = load_features(feat_x);
      const FeatureMatrix y = load_features(feat_y);
      const PairSets p = load_pairs_or_sample(x, y);
      CoupledModel model = net_opts.init(x.dim(), y.dim(), common.seed);
      const double initial = total_loss(model, x.values, y.values, p, loss_opts.cfg);
      const TrainResult r = train(std::move(model), x.values, y.values, p, loss_opts.cfg, train_cfg);
      save_model(model_out, r.model);
      primary_output = model_out;
      out << "epochs=" << r.report.epochs_run << " converged=" << (r.report.converged ? 1 : 0)
          << " initial_loss=" << format_double(initial)
          << " final_loss=" << format_double(r.report.loss_trace.back()) << '\n';
    } else if (hash_cmd->parsed()) {
      const CoupledModel model = load_model(model_path);
      const FeatureMatrix f = load_features(features_path);
      const auto codes = hash_rows(model.net(modality == "y" ? Modality::Y : Modality::X), f.values);
      save_codes(codes_out, model.bits(), codes);
      primary_output = codes_out;
      out << "hashed " << codes.size() << " samples to " << model.bits() << " bits\n";
    } else if (retrieve_cmd->parsed()) {
      const auto queries = load_codes(queries_path);
      const auto database = load_codes(database_path);
      const HashIndex index(database);
      std::ofstream file;
      if (!retrieve_out.empty()) {
        file.open(retrieve_out);
        if (!file) throw Error(ErrorCode::Io, "cannot open " + retrieve_out);
      }
      std::ostream& os = retrieve_out.empty() ? out : file;
      os << "query,rank,id,distance\n";
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const RankedResult hits = query(index, queries[q], k);
        for (std::size_t r = 0; r < hits.size(); ++r)
          os << q << ',' << r + 1 << ',' << hits[r].id << ',' << hits[r].distance << '\n';
      }
      primary_output = retrieve_out;
    } else if (eval_cmd->parsed()) {
      run_evaluation(load_model(model_path), eval_opts, out);
      primary_output = eval_opts.csv_prefix;
    } else if (base_cmd->parsed()) {
      const FeatureMatrix x = load_features(feat_x);
      const FeatureMatrix y = load_features(feat_y);
      const PairSets p = load_pairs_or_sample(x, y);
      CmsshOptions co;
      co.grid = grid;
      const CmsshModel m = fit_cmssh(x.values, y.values, p.cross, net_opts.bits, co);
      const CoupledModel as_nets = to_coupled(m);
      save_model(model_out, as_nets);
      primary_output = model_out;
      out << "fitted " << m.bits() << " CM-SSH bits\n";
      if (!eval_opts.db_x.empty() && !eval_opts.db_y.empty()) run_evaluation(as_nets, eval_opts, out);
    } else if (grad_cmd->parsed()) {
      loss_opts.cfg.validate(net_opts.bits);
      const FeatureMatrix x = load_features(feat_x);
      const FeatureMatrix y = load_features(feat_y);
      const PairSets p = load_pairs_or_sample(x, y);
      const CoupledModel model =
          model_path.empty() ? net_opts.init(x.dim(), y.dim(), common.seed) : load_model(model_path);
      const double e = gradient_check(model, x.values, y.values, p, loss_opts.cfg, step);
      out << "max_relative_error=" << format_double(e) << '\n';
      if (!(e < threshold)) {
        err << "gradient check failed: " << format_double(e) << " >= " << format_double(threshold) << '\n';
        return 1;
      }
    }
    echo_config(config_path, primary_output);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mmhash::cli
