// Command-line surface for the omnitree pipeline.
//
// Subcommands:
//   refine    adaptively build a tree + data vector for a shape
//   evaluate  L1 error / storage / information density of stored blobs
//   sweep     ladder of resolutions over one or both modes, CSV output
//   export    filled leaves as OBJ boxes or all leaves as CSV
//   inspect   human-readable stats of a tree blob
//
// Results go to stdout, logs to stderr. All randomness derives from --seed.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omnitree/codec.hpp"
#include "omnitree/core.hpp"
#include "omnitree/driver.hpp"
#include "omnitree/metrics.hpp"
#include "omnitree/oracles.hpp"
#include "omnitree/refinement.hpp"

namespace {

using namespace omnitree;

std::vector<std::uint8_t> read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_blob(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Omnitree read_tree(const std::string& path, TreeCoding* coding = nullptr) {
  const auto blob = read_blob(path);
  const auto magic = blob_magic(blob);
  if (magic == "OMNI") {
    if (coding) *coding = TreeCoding::kOmnitree;
    return decode(blob);
  }
  if (magic == "OMNO") {
    if (coding) *coding = TreeCoding::kOctree;
    return decode_octree(blob);
  }
  throw std::runtime_error("not a tree blob: " + path);
}

std::vector<std::size_t> parse_ladder(const std::string& text) {
  std::vector<std::size_t> ladder;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t n = std::stoull(item);
    if (n == 0 || (n & (n - 1)) != 0)
      throw std::runtime_error("ladder entries must be powers of two: " + item);
    if (!ladder.empty() && n <= ladder.back())
      throw std::runtime_error("ladder must be strictly increasing");
    ladder.push_back(n);
  }
  if (ladder.empty()) throw std::runtime_error("empty leaf ladder");
  return ladder;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(conv(item));
  if (out.empty()) throw std::runtime_error("empty list");
  return out;
}

struct CommonOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--seed", common.seed, "master seed; all randomness derives from it");
  cmd->add_option("--threads", common.threads, "worker threads (outputs are identical for any value)")
      ->envname("OMNITREE_THREADS");
  cmd->add_option("--config", common.config_path,
                  "flat key=value file with this subcommand's options");
}

/// Expands `--config file` into option tokens appended to the argument list.
/// Keys already given explicitly keep their command-line values.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  auto given = [&args](const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : args)
      if (a == flag || a.starts_with(flag + "=")) return true;
    return false;
  };
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(start, end - start + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config lines must be key=value: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (given(key)) continue;
    args.push_back("--" + key + "=" + value);  // works for flags and values alike
  }
  return args;
}

unsigned default_fill_samples(int d) { return d == 4 ? 8192u : 4096u; }
std::size_t default_eval_samples(int d) { return d == 4 ? (std::size_t(1) << 24) : (std::size_t(1) << 18); }

// ---------------------------------------------------------------------------

struct RefineArgs {
  std::string shape;
  std::string mode = "omnitree";
  std::size_t max_leaves = 1024;
  unsigned ns = 512;
  unsigned ng = 0;  // 0 = default for the dimension
  bool time_rotate = false;
  std::string tree_out;
  std::string field_out = "field.omng";
  CommonOptions common;
};

int cmd_refine(const RefineArgs& args) {
  const auto oracle = make_shape(args.shape, args.time_rotate);
  const int d = oracle->dimension();
  AdaptConfig config;
  config.mode = parse_mode(args.mode);
  config.target_leaves = args.max_leaves;
  config.saltelli_base = args.ns;
  config.fill_samples = args.ng == 0 ? default_fill_samples(d) : args.ng;
  config.seed = args.common.seed;
  config.threads = args.common.threads;

  const auto result = adapt(*oracle, config);
  const auto field = fill_data(result.tree, *oracle, config.fill_samples, config.seed,
                               config.threads);

  const std::string tree_path =
      !args.tree_out.empty() ? args.tree_out
                             : (config.mode == Mode::kOctree ? "tree.omno" : "tree.omni");
  write_blob(tree_path, config.mode == Mode::kOctree ? encode_octree(result.tree)
                                                     : encode(result.tree));
  write_blob(args.field_out, encode_field(field));

  const auto stats = node_stats(result.tree);
  std::ostringstream log;
  log << "wrote " << tree_path << " and " << args.field_out << ": " << stats.node_count
      << " nodes, " << stats.leaf_count << " leaves, mean leaf depth " << stats.mean_leaf_depth
      << ", max levels (";
  for (int j = 0; j < d; ++j) log << (j ? "," : "") << stats.max_level[std::size_t(j)];
  log << ")";
  std::cerr << log.str() << "\n";
  if (result.perfectly_resolved) {
    std::cerr << "warning: all refinement priorities are zero; the shape is perfectly "
                 "resolved below the requested budget\n";
    return 2;
  }
  return 0;
}

struct EvaluateArgs {
  std::string tree_path;
  std::string field_path;
  std::string shape;
  bool time_rotate = false;
  std::size_t ne = 0;  // 0 = default for the dimension
  CommonOptions common;
};

int cmd_evaluate(const EvaluateArgs& args) {
  TreeCoding coding = TreeCoding::kOmnitree;
  const auto tree = read_tree(args.tree_path, &coding);
  const auto field = decode_field(read_blob(args.field_path));
  const auto oracle = make_shape(args.shape, args.time_rotate);
  if (oracle->dimension() != tree.dimension())
    throw std::runtime_error("shape dimension does not match the tree blob");
  const std::size_t ne = args.ne == 0 ? default_eval_samples(tree.dimension()) : args.ne;
  const auto result = evaluate(tree, field, *oracle, ne, args.common.seed, coding,
                               args.common.threads);
  std::cout << to_json(result) << "\n";
  return 0;
}

struct SweepArgs {
  std::string shape;
  std::string modes = "octree,omnitree";
  std::string ladder = "16,32,64,128,256,512,1024,2048,4096,8192";
  std::string seeds = "0";
  unsigned ns = 512;
  unsigned ng = 0;
  std::size_t ne = 0;
  bool time_rotate = false;
  std::string out = "-";
  CommonOptions common;
};

int cmd_sweep(const SweepArgs& args) {
  const auto oracle = make_shape(args.shape, args.time_rotate);
  const int d = oracle->dimension();
  const auto ladder = parse_ladder(args.ladder);
  const auto modes = parse_list<Mode>(args.modes, +[](const std::string& s) { return parse_mode(s); });
  const auto seeds = parse_list<std::uint64_t>(
      args.seeds, +[](const std::string& s) { return std::uint64_t(std::stoull(s)); });
  const unsigned ng = args.ng == 0 ? default_fill_samples(d) : args.ng;
  const std::size_t ne = args.ne == 0 ? default_eval_samples(d) : args.ne;

  std::vector<SweepRow> rows;
  for (const Mode mode : modes) {
    for (const std::uint64_t seed : seeds) {
      AdaptConfig config;
      config.mode = mode;
      config.target_leaves = ladder.back();
      config.saltelli_base = args.ns;
      config.fill_samples = ng;
      config.seed = seed;
      config.threads = args.common.threads;
      const auto snapshots = adapt_ladder(*oracle, config, ladder);
      std::optional<double> prev_l1;
      std::size_t prev_n = 0;
      for (const auto& snap : snapshots) {
        const auto field = fill_data(snap.tree, *oracle, ng, seed, config.threads);
        const auto res = evaluate(snap.tree, field, *oracle, ne, seed,
                                  mode == Mode::kOctree ? TreeCoding::kOctree
                                                        : TreeCoding::kOmnitree,
                                  config.threads);
        SweepRow row;
        row.shape = args.shape;
        row.mode = mode_name(mode);
        row.d = d;
        row.leaves = res.leaves;
        row.l1 = res.l1;
        if (prev_l1.has_value() && res.leaves > prev_n)
          row.rate = convergence_rate(*prev_l1, prev_n, res.l1, res.leaves);
        row.tree_bits = res.tree_bits;
        row.data_bits = res.data_bits;
        row.info_density = res.info_density;
        row.seed = seed;
        rows.push_back(row);
        prev_l1 = res.l1;
        prev_n = res.leaves;
      }
    }
  }
  const auto csv = sweep_csv(rows);
  if (args.out == "-") {
    std::cout << csv;
  } else {
    std::ofstream file(args.out);
    if (!file) throw std::runtime_error("cannot open file for writing: " + args.out);
    file << csv;
  }
  return 0;
}

struct ExportArgs {
  std::string tree_path;
  std::string field_path;
  std::string format = "obj";
  double slice_time = -1.0;
  std::string out = "-";
  CommonOptions common;
};

int cmd_export(const ExportArgs& args) {
  const auto tree = read_tree(args.tree_path);
  const auto field = decode_field(read_blob(args.field_path));
  if (field.size() != tree.leaf_count())
    throw std::runtime_error("field length does not match the tree leaf count");
  const int d = tree.dimension();
  const auto rects = leaf_rectangles(tree);

  std::ostringstream body;
  body.precision(17);
  if (args.format == "csv") {
    for (std::size_t n = 0; n < rects.size(); ++n) {
      for (int j = 0; j < d; ++j) body << rects[n].index[std::size_t(j)] << ",";
      for (int j = 0; j < d; ++j) body << int(rects[n].level[std::size_t(j)]) << ",";
      body << int(field[n]) << "\n";
    }
  } else if (args.format == "obj") {
    if (d != 3 && d != 4) throw std::runtime_error("obj export needs a 3-d or 4-d tree");
    if (d == 4 && args.slice_time < 0.0)
      throw std::runtime_error("obj export of a 4-d tree needs --slice-time");
    std::size_t vertex_base = 1;
    for (std::size_t n = 0; n < rects.size(); ++n) {
      if (!field[n]) continue;
      const auto& r = rects[n];
      if (d == 4) {
        const double lo = r.lower(3), hi = r.upper(3);
        const bool holds = args.slice_time >= lo &&
                           (args.slice_time < hi || (hi == 1.0 && args.slice_time == 1.0));
        if (!holds) continue;
      }
      for (int c = 0; c < 8; ++c)
        body << "v " << (c & 1 ? r.upper(0) : r.lower(0)) << " "
             << (c & 2 ? r.upper(1) : r.lower(1)) << " " << (c & 4 ? r.upper(2) : r.lower(2))
             << "\n";
      const std::size_t v = vertex_base;
      const std::array<std::array<std::size_t, 4>, 6> faces = {{{0, 4, 6, 2},
                                                                {1, 3, 7, 5},
                                                                {0, 1, 5, 4},
                                                                {2, 6, 7, 3},
                                                                {0, 2, 3, 1},
                                                                {4, 5, 7, 6}}};
      for (const auto& f : faces) {
        body << "f " << v + f[0] << " " << v + f[1] << " " << v + f[2] << "\n";
        body << "f " << v + f[0] << " " << v + f[2] << " " << v + f[3] << "\n";
      }
      vertex_base += 8;
    }
  } else {
    throw std::runtime_error("format must be obj or csv");
  }

  if (args.out == "-") {
    std::cout << body.str();
  } else {
    std::ofstream file(args.out);
    if (!file) throw std::runtime_error("cannot open file for writing: " + args.out);
    file << body.str();
  }
  return 0;
}

struct InspectArgs {
  std::string tree_path;
  bool verbose = false;
};

int cmd_inspect(const InspectArgs& args) {
  const auto tree = read_tree(args.tree_path);
  const auto stats = node_stats(tree);
  const auto storage = storage_report(tree, 1);
  std::cout << "dimension: " << tree.dimension() << "\n";
  std::cout << "nodes: " << stats.node_count << "\n";
  std::cout << "leaves: " << stats.leaf_count << "\n";
  std::cout << "mean leaf depth: " << stats.mean_leaf_depth << "\n";
  std::cout << "normalized: " << (is_normalized(tree) ? "yes" : "no") << "\n";
  std::cout << "tree bits: " << storage.tree_bits_omnitree;
  if (storage.tree_bits_octree.has_value())
    std::cout << " (octree coding: " << *storage.tree_bits_octree << ")";
  std::cout << "\n";
  std::cout << "max levels:";
  for (int j = 0; j < tree.dimension(); ++j)
    std::cout << " " << stats.max_level[std::size_t(j)];
  std::cout << "\n";
  std::cout << "split histogram:";
  for (int j = 0; j < tree.dimension(); ++j)
    std::cout << " " << stats.split_count[std::size_t(j)];
  std::cout << "\n";
  if (args.verbose) std::cout << render_location_stack(tree, MarkerMap{});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anisotropic dyadic trees for binary shape representation"};
  app.require_subcommand(1);

  RefineArgs refine_args;
  auto* refine_cmd = app.add_subcommand("refine", "adaptively refine a tree for a shape");
  refine_cmd->add_option("--shape", refine_args.shape,
                         "cube | sphere | tetrahedron | rod | halfspace:<axis>:<c> | mesh:<path>")
      ->required();
  refine_cmd->add_option("--mode", refine_args.mode, "octree | omnitree");
  refine_cmd->add_option("--max-leaves", refine_args.max_leaves, "leaf budget (stop at or above)");
  refine_cmd->add_option("--ns", refine_args.ns, "Saltelli base sample count (power of two)");
  refine_cmd->add_option("--ng", refine_args.ng, "fill samples per leaf (default 4096/8192)");
  refine_cmd->add_flag("--time-rotate", refine_args.time_rotate, "lift the 3-d shape to 4-d");
  refine_cmd->add_option("--tree-out", refine_args.tree_out, "tree blob path");
  refine_cmd->add_option("--field-out", refine_args.field_out, "field blob path");
  add_common(refine_cmd, refine_args.common);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate stored blobs against a shape");
  eval_cmd->add_option("--tree", eval_args.tree_path, "tree blob")->required();
  eval_cmd->add_option("--field", eval_args.field_path, "field blob")->required();
  eval_cmd->add_option("--shape", eval_args.shape, "shape spec")->required();
  eval_cmd->add_flag("--time-rotate", eval_args.time_rotate, "lift the 3-d shape to 4-d");
  eval_cmd->add_option("--ne", eval_args.ne, "error sample count (default 2^18 / 2^24)");
  add_common(eval_cmd, eval_args.common);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "resolution ladder, CSV output");
  sweep_cmd->add_option("--shape", sweep_args.shape, "shape spec")->required();
  sweep_cmd->add_option("--modes", sweep_args.modes, "comma list of modes");
  sweep_cmd->add_option("--leaves", sweep_args.ladder, "comma ladder of powers of two");
  sweep_cmd->add_option("--seeds", sweep_args.seeds, "comma list of seeds");
  sweep_cmd->add_option("--ns", sweep_args.ns, "Saltelli base sample count");
  sweep_cmd->add_option("--ng", sweep_args.ng, "fill samples per leaf");
  sweep_cmd->add_option("--ne", sweep_args.ne, "error sample count");
  sweep_cmd->add_flag("--time-rotate", sweep_args.time_rotate, "lift the 3-d shape to 4-d");
  sweep_cmd->add_option("--out", sweep_args.out, "CSV path or - for stdout");
  add_common(sweep_cmd, sweep_args.common);

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export", "export leaf geometry");
  export_cmd->add_option("--tree", export_args.tree_path, "tree blob")->required();
  export_cmd->add_option("--field", export_args.field_path, "field blob")->required();
  export_cmd->add_option("--format", export_args.format, "obj | csv");
  export_cmd->add_option("--slice-time", export_args.slice_time,
                         "time slice in [0,1] for 4-d obj export");
  export_cmd->add_option("--out", export_args.out, "output path or - for stdout");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "print tree statistics");
  inspect_cmd->add_option("--tree", inspect_args.tree_path, "tree blob")->required();
  inspect_cmd->add_flag("-v,--verbose", inspect_args.verbose, "also print the location stack");

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (refine_cmd->parsed()) return cmd_refine(refine_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    if (export_cmd->parsed()) return cmd_export(export_args);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
