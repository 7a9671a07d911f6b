#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qdtree/error.h"
#include "qdtree/extensions.h"
#include "qdtree/harness.h"
#include "qdtree/io.h"

namespace fs = std::filesystem;
using namespace qdtree;

namespace {

unsigned env_workers() {
  if (const char* v = std::getenv("QDTREE_WORKERS")) {
    try {
      const long n = std::stol(v);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("QDTREE_WORKERS must be a positive integer, got '") + v + "'");
  }
  return 1;
}

struct Inputs {
  std::string schema, data, workload;
};

Schema load_schema(const std::string& path) {
  return schema_from_json(parse_json(read_file(path), path));
}

Dataset load_data(const Schema& s, const std::string& path) {
  return dataset_from_csv(read_file(path), s);
}

Workload load_workload(const Schema& s, const std::string& path) {
  return workload_from_json(parse_json(read_file(path), path), s);
}

std::vector<Cut> load_cuts(const Schema& s, const Workload& w, const std::string& path) {
  const json j = parse_json(read_file(path), path);
  if (!j.is_array()) throw ParseError(path + ": expected an array of cuts");
  std::vector<Cut> cuts;
  for (std::size_t i = 0; i < j.size(); ++i) {
    cuts.push_back(cut_from_json(j[i], s, w.advanced, path + "[" + std::to_string(i) + "]"));
  }
  return cuts;
}

std::string layout_mode(const std::string& text, const std::string& path) {
  const json j = parse_json(text, path);
  return j.is_object() ? j.value("mode", std::string("plain")) : "plain";
}

void write_out(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_file(path, contents);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qd-tree layout builder and evaluator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Root random seed")->capture_default_str();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a dataset and workload");
  std::string gen_kind = "disjunctive_microbench", gen_dir = ".";
  GeneratorSpec gspec;
  gen->add_option("--kind", gen_kind, "disjunctive_microbench|propeller|uniform|clustered")
      ->capture_default_str();
  gen->add_option("--rows", gspec.rows)->capture_default_str();
  gen->add_option("--arm-rows", gspec.arm_rows, "Propeller N")->capture_default_str();
  gen->add_option("--columns", gspec.columns)->capture_default_str();
  gen->add_option("--domain", gspec.domain)->capture_default_str();
  gen->add_option("--clusters", gspec.clusters)->capture_default_str();
  gen->add_option("--queries", gspec.queries)->capture_default_str();
  gen->add_option("--out-dir", gen_dir)->capture_default_str();

  Inputs in;
  auto add_inputs = [&](CLI::App* sub, bool data, bool workload) {
    sub->add_option("--schema", in.schema)->required();
    if (data) sub->add_option("--data", in.data)->required();
    if (workload) sub->add_option("--workload", in.workload)->required();
  };

  // extract-cuts
  auto* xc = app.add_subcommand("extract-cuts", "List candidate cuts of a workload");
  add_inputs(xc, false, true);
  std::string xc_out;
  xc->add_option("--out", xc_out, "Output file (default stdout)");

  // build
  auto* build = app.add_subcommand("build", "Build a layout");
  add_inputs(build, true, true);
  std::string algo = "greedy", mode = "plain", cuts_file, build_out, curve_out, ckpt_out;
  std::size_t min_block = 1, k = 1, max_iters = 1;
  bool prune = false, keep_t1 = false;
  RlConfig rl;
  build->add_option("--algo", algo, "greedy|rl")->check(CLI::IsMember({"greedy", "rl"}))
      ->capture_default_str();
  build->add_option("--mode", mode, "plain|overlap|two-tree")
      ->check(CLI::IsMember({"plain", "overlap", "two-tree"}))->capture_default_str();
  build->add_option("--min-block-size", min_block)->capture_default_str();
  build->add_option("--cuts-file", cuts_file, "JSON array of candidate cuts");
  build->add_option("--k", k, "Two-tree: number of worst queries")->capture_default_str();
  build->add_option("--max-iters", max_iters)->capture_default_str();
  build->add_flag("--prune", prune, "Two-tree: drop secondary blocks no worst query reads");
  build->add_flag("--keep-t1", keep_t1, "Two-tree: never rebuild the first tree");
  build->add_option("--sample-ratio", rl.sample_ratio)->capture_default_str();
  build->add_option("--episodes", rl.episodes)->capture_default_str();
  build->add_option("--timeout-s", rl.timeout_s)->capture_default_str();
  build->add_option("--hidden-width", rl.hidden_width)->capture_default_str();
  build->add_option("--learning-rate", rl.learning_rate)->capture_default_str();
  build->add_option("--batch-episodes", rl.batch_episodes)->capture_default_str();
  build->add_option("--out", build_out, "Layout JSON")->required();
  build->add_option("--curve", curve_out, "Learning curve CSV (rl)");
  build->add_option("--checkpoint", ckpt_out, "Policy checkpoint JSON (rl, plain mode)");

  // route-data
  auto* rd = app.add_subcommand("route-data", "Write the dataset with a BID column");
  add_inputs(rd, true, false);
  std::string layout_path, rd_out;
  rd->add_option("--layout", layout_path)->required();
  rd->add_option("--out", rd_out, "Output CSV (default stdout)");

  // route-query
  auto* rq = app.add_subcommand("route-query", "List the blocks each query reads");
  add_inputs(rq, true, true);
  rq->add_option("--layout", layout_path)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a layout against a workload");
  add_inputs(ev, true, true);
  std::string ev_dir = ".";
  ev->add_option("--layout", layout_path)->required();
  ev->add_option("--out-dir", ev_dir)->capture_default_str();

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exhaustive optimum on a tiny instance");
  add_inputs(orc, true, true);
  std::size_t max_leaves = 0;
  std::string orc_out;
  orc->add_option("--min-block-size", min_block)->capture_default_str();
  orc->add_option("--max-leaves", max_leaves, "0 = no limit")->capture_default_str();
  orc->add_option("--cuts-file", cuts_file);
  orc->add_option("--out", orc_out, "Witness tree JSON");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare all partitioners");
  add_inputs(cmp, true, true);
  std::string cmp_out;
  bool cmp_rl = false;
  cmp->add_option("--min-block-size", min_block)->capture_default_str();
  cmp->add_option("--cuts-file", cuts_file);
  cmp->add_flag("--rl", cmp_rl, "Include the RL builder");
  cmp->add_option("--sample-ratio", rl.sample_ratio)->capture_default_str();
  cmp->add_option("--episodes", rl.episodes)->capture_default_str();
  cmp->add_option("--timeout-s", rl.timeout_s)->capture_default_str();
  cmp->add_option("--hidden-width", rl.hidden_width)->capture_default_str();
  cmp->add_option("--out", cmp_out, "Comparison CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const unsigned workers = env_workers();
    if (gen->parsed()) {
      gspec.kind = parse_generator_kind(gen_kind);
      gspec.seed = seed;
      const auto g = generate(gspec);
      fs::create_directories(gen_dir);
      write_file(fs::path(gen_dir) / "schema.json", schema_to_json(g.data.schema()).dump(2) + "\n");
      write_file(fs::path(gen_dir) / "data.csv", dataset_to_csv(g.data));
      write_file(fs::path(gen_dir) / "workload.json",
                 workload_to_json(g.workload, g.data.schema()).dump(2) + "\n");
      std::cout << "rows=" << g.data.num_rows() << " queries=" << g.workload.size() << "\n";
      return 0;
    }

    const Schema schema = load_schema(in.schema);
    if (xc->parsed()) {
      const auto w = load_workload(schema, in.workload);
      json out = json::array();
      for (const auto& c : extract_cuts(w, schema).all()) out.push_back(cut_to_json(c, schema));
      write_out(xc_out, out.dump(2) + "\n");
      return 0;
    }

    const Dataset data = load_data(schema, in.data);
    const Workload w = in.workload.empty() ? Workload{} : load_workload(schema, in.workload);
    auto cut_set = [&] {
      return cuts_file.empty() ? extract_cuts(w, schema).all() : load_cuts(schema, w, cuts_file);
    };

    if (build->parsed() || cmp->parsed()) {
      BuildConfig cfg;
      cfg.builder = algo == "rl" ? Builder::kRl : Builder::kGreedy;
      cfg.greedy.min_block_size = min_block;
      cfg.greedy.cuts = cut_set();
      cfg.greedy.threads = workers;
      cfg.rl = rl;
      cfg.rl.seed = seed;
      cfg.rl.min_block_size = min_block;
      cfg.rl.workers = workers;

      if (cmp->parsed()) {
        write_out(cmp_out, comparison_csv(compare_partitioners(data, w, cfg, cmp_rl)));
        return 0;
      }
      std::string text;
      if (mode == "plain") {
        QdTree tree;
        if (cfg.builder == Builder::kRl) {
          std::string curve = curve_csv_header();
          TrainOptions opts;
          opts.on_episode = [&](const CurvePoint& p) {
            curve += curve_csv_line(p);
            if (!curve_out.empty() && p.episode % cfg.rl.batch_episodes == 0) {
              write_file(curve_out, curve);
            }
          };
          auto res = train(data, w, cfg.greedy.cuts, cfg.rl, opts);
          if (!curve_out.empty()) write_file(curve_out, curve);
          if (!ckpt_out.empty()) write_file(ckpt_out, res.policy.to_json() + "\n");
          tree = std::move(res.best);
        } else {
          tree = build_tree(data, w, cfg);
        }
        text = tree.freeze(tree.route_rows(data, workers), data).to_json(1);
      } else if (mode == "overlap") {
        text = build_overlap(data, w, cfg).to_json(1);
      } else {
        TwoTreeConfig tc;
        tc.build = cfg;
        tc.k = k;
        tc.max_iters = max_iters;
        tc.rebuild_t1 = !keep_t1;
        tc.prune = prune;
        text = build_two_tree(data, w, tc).to_json(1);
      }
      write_file(build_out, text + "\n");
      return 0;
    }

    if (rd->parsed() || rq->parsed() || ev->parsed()) {
      const std::string text = read_file(layout_path);
      const std::string lmode = layout_mode(text, layout_path);
      SkipReport rep;
      if (lmode == "overlap") {
        const auto layout = OverlapLayout::from_json(text);
        if (rd->parsed()) write_out(rd_out, bid_csv(data, overlap_block_rows(layout, data)));
        if (rq->parsed()) {
          for (std::size_t q = 0; q < w.size(); ++q) {
            json blocks = json::array();
            for (const auto& rb : route_query_overlap(layout, w.queries[q], w.advanced)) {
              blocks.push_back(rb.block);
            }
            std::cout << json{{"query", q}, {"blocks", blocks}}.dump() << "\n";
          }
        }
        if (ev->parsed()) rep = evaluate_overlap(layout, data, w);
      } else if (lmode == "two-tree") {
        auto layout = TwoTreeLayout::from_json(text);
        if (rd->parsed()) {
          // Secondary-tree blocks follow the primary ones in BID order.
          auto rows = layout.t1.route_rows(data).rows_by_block(layout.t1.num_blocks());
          auto second = layout.t2.route_rows(data).rows_by_block(layout.t2.num_blocks());
          if (layout.pruned) {
            std::vector<bool> kept(second.size(), false);
            for (BlockId b : layout.t2_kept) kept[static_cast<std::size_t>(b)] = true;
            for (std::size_t b = 0; b < second.size(); ++b) {
              if (!kept[b]) second[b].clear();
            }
          }
          rows.insert(rows.end(), second.begin(), second.end());
          write_out(rd_out, bid_csv(data, rows));
        }
        if (rq->parsed() || ev->parsed()) choose_trees(layout, data, w);
        if (rq->parsed()) {
          for (std::size_t q = 0; q < w.size(); ++q) {
            const QdTree& t = layout.choice[q] ? layout.t2 : layout.t1;
            std::cout << json{{"query", q},
                              {"tree", layout.choice[q] ? "t2" : "t1"},
                              {"blocks", t.route_query(w.queries[q])}}.dump() << "\n";
          }
        }
        if (ev->parsed()) rep = evaluate_two_tree(layout, data, w);
      } else if (lmode == "plain") {
        const auto tree = QdTree::from_json(text);
        const auto assignment = tree.route_rows(data, workers);
        if (rd->parsed()) write_out(rd_out, bid_csv(data, assignment.rows_by_block(tree.num_blocks())));
        if (rq->parsed()) {
          for (std::size_t q = 0; q < w.size(); ++q) {
            std::cout << json{{"query", q}, {"blocks", tree.route_query(w.queries[q])}}.dump()
                      << "\n";
          }
        }
        if (ev->parsed()) rep = evaluate_partitioning(tree, assignment, data, w);
      } else {
        throw ParseError(layout_path + ": unknown layout mode '" + lmode + "'");
      }
      if (ev->parsed()) {
        fs::create_directories(ev_dir);
        write_file(fs::path(ev_dir) / "report.json", rep.to_json() + "\n");
        write_file(fs::path(ev_dir) / "per_query.csv", rep.per_query_csv());
        std::cout << summary_line(rep) << "\n";
      }
      return 0;
    }

    if (orc->parsed()) {
      const auto res = oracle_opt(data, w, cut_set(), min_block, max_leaves);
      if (!orc_out.empty()) write_file(orc_out, res.tree.to_json(1) + "\n");
      std::cout << "c_opt=" << res.c_opt << " leaves=" << res.tree.num_blocks() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
