#include "cli.hpp"

#include "m3d/checkpoint.hpp"
#include "m3d/errors.hpp"
#include "m3d/maxpool_nms.hpp"
#include "m3d/sequence_io.hpp"
#include "m3d/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

namespace m3d::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::int64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--config", c.config, "config file with key = value lines");
  app->add_option("--set", c.sets, "override key=value (repeatable)");
  app->add_option("--seed", c.seed, "master seed (overrides the seed key)");
  auto* o = app->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
}

RunConfig build_config(const Common& c) {
  RunConfig rc;
  if (!c.config.empty()) rc.load_file(c.config);
  for (const auto& s : c.sets) rc.apply_override(s);
  if (c.seed) rc.set("seed", std::to_string(*c.seed));
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("error writing " + path.string());
}

void write_effective_config(const fs::path& dir, const RunConfig& rc) {
  write_text(dir / "config.txt", rc.dump());
  write_text(dir / "config_hash.txt", rc.hash() + "\n");
}

std::string seq_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%05d.m3ds", i);
  return buf;
}

// -- data loading ----------------------------------------------------------------------------------

struct Split {
  std::vector<Sequence> sequences;
  int files = 0;
  int corrupt = 0;
};

Split load_split(const fs::path& dir, double max_corrupt_fraction, std::ostream& err) {
  if (!fs::is_directory(dir)) throw DataError("missing data directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".m3ds") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no sequence files in " + dir.string());
  Split s;
  s.files = static_cast<int>(files.size());
  for (const auto& f : files) {
    try {
      s.sequences.push_back(read_sequence(f));
    } catch (const DataError& e) {
      ++s.corrupt;
      err << "warning: skipping " << f.string() << ": " << e.what() << "\n";
    }
  }
  if (s.corrupt > max_corrupt_fraction * s.files) {
    throw DataError(std::to_string(s.corrupt) + " of " + std::to_string(s.files) + " sequence files in " +
                    dir.string() + " are unreadable");
  }
  return s;
}

// -- generate -----------------------------------------------------------------------------------

int cmd_generate(const Common& c, std::ostream& out) {
  const RunConfig rc = build_config(c);
  const SceneConfig sc = scene_config_from(rc);
  const auto seed = static_cast<std::uint64_t>(rc.get_int64("seed"));
  const fs::path root(c.out);
  fs::create_directories(root);

  nlohmann::ordered_json manifest;
  manifest["schema"] = "m3d.manifest.v1";
  manifest["seed"] = seed;
  manifest["config_hash"] = rc.hash();
  const std::pair<const char*, std::uint64_t> splits[] = {{"train", kTrainStream}, {"eval", kEvalStream}};
  int total = 0;
  for (const auto& [name, stream] : splits) {
    const int count = rc.get_int(std::string("data.") + name + "_sequences");
    if (count < 0) throw std::invalid_argument(std::string("data.") + name + "_sequences must be >= 0");
    fs::create_directories(root / name);
    auto files = nlohmann::ordered_json::array();
    for (int i = 0; i < count; ++i) {
      SceneConfig cfg = sc;
      cfg.seed = derive_seed(seed, stream, static_cast<std::uint64_t>(i));
      const Sequence seq = generate_sequence(cfg);
      const std::string rel = std::string(name) + "/" + seq_name(i);
      write_sequence(root / rel, seq);
      files.push_back({{"file", rel}, {"frames", seq.size()}});
    }
    manifest["splits"][name] = {{"count", count}, {"files", files}};
    total += count;
  }
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  write_effective_config(root, rc);
  out << "wrote " << total << " sequences to " << root.string() << " (config " << rc.hash() << ")\n";
  return kOk;
}

// -- train ----------------------------------------------------------------------------------------

CheckpointData snapshot(const Model& model, const nn::Adam& adam, const std::mt19937_64& rng, const RunConfig& rc) {
  CheckpointData d = capture_checkpoint(model.params(), &adam);
  d.config_hash = rc.hash();
  d.structural_config = rc.structural_dump();
  d.full_config = rc.dump();
  std::ostringstream os;
  os << rng;
  d.rng_state = os.str();
  return d;
}

void require_compatible(const CheckpointData& ck, const RunConfig& rc) {
  if (ck.structural_config == rc.structural_dump()) return;
  std::string msg = "checkpoint is incompatible with this configuration; structural keys differ:";
  for (const auto& line : diff_dumps(ck.structural_config, rc.structural_dump())) msg += "\n  " + line;
  throw DataError(msg);
}

void write_report(const fs::path& dir, const std::string& stem, const MetricReport& rep) {
  write_text(dir / (stem + ".txt"), rep.to_text());
  write_text(dir / (stem + ".json"), rep.to_json() + "\n");
}

std::string threshold_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", t);
  return buf;
}

void write_pr_plots(const fs::path& dir, const MetricReport& rep) {
  for (const auto& curve : rep.curves) {
    const std::string tag = threshold_tag(curve.threshold);
    std::ostringstream csv;
    csv << "recall,precision\n" << std::setprecision(9);
    for (const auto& p : curve.points) csv << p.recall << "," << p.precision << "\n";
    write_text(dir / ("pr_" + tag + ".csv"), csv.str());

    // 400x400 plot area with a 50 px margin
    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\">\n"
        << "<rect x=\"50\" y=\"50\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n"
        << "<text x=\"250\" y=\"490\" text-anchor=\"middle\">recall</text>\n"
        << "<text x=\"15\" y=\"250\" transform=\"rotate(-90 15 250)\" text-anchor=\"middle\">precision</text>\n"
        << "<text x=\"250\" y=\"35\" text-anchor=\"middle\">PR @ IoU " << tag << "</text>\n"
        << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& p : curve.points) svg << 50 + 400 * p.recall << "," << 450 - 400 * p.precision << " ";
    svg << "\"/>\n</svg>\n";
    write_text(dir / ("pr_" + tag + ".svg"), svg.str());
  }
}

int cmd_train(const Common& c, const std::string& data, const std::string& resume, std::ostream& out,
              std::ostream& err) {
  const RunConfig rc = build_config(c);
  const fs::path root(c.out);
  fs::create_directories(root);
  write_effective_config(root, rc);

  const double max_corrupt = rc.get_double("data.max_corrupt_fraction");
  const Split train = load_split(fs::path(data) / "train", max_corrupt, err);
  const Split held = load_split(fs::path(data) / "eval", max_corrupt, err);

  Model model(model_config_from(rc));
  const TrainConfig tc = train_config_from(rc);
  Trainer tr(model, tc);
  if (!resume.empty()) {
    const CheckpointData ck = read_checkpoint(fs::path(resume));
    require_compatible(ck, rc);
    restore_checkpoint(ck, model.params(), &tr.optimizer());
    std::istringstream is(ck.rng_state);
    is >> tr.rng();
    if (!is) throw DataError("checkpoint rng state is unreadable");
    out << "resumed from " << resume << " at step " << tr.step() << "\n";
  }

  std::ofstream log(root / "train.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot write " + (root / "train.jsonl").string());
  tr.set_log(&log);

  auto save = [&] {
    const CheckpointData d = snapshot(model, tr.optimizer(), tr.rng(), rc);
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%08lld.m3dc", static_cast<long long>(tr.step()));
    write_checkpoint(root / name, d);
    write_checkpoint(root / "checkpoint.m3dc", d);
  };

  bool saved_last = false;
  while (tr.step() < tc.steps) {
    const StepResult r = tr.train_step(std::span<const Sequence>(train.sequences));
    saved_last = false;
    if (r.step % tc.log_interval == 0) {
      out << "step " << r.step << "  L_total " << r.l_total << "  (fsd " << r.l_fsd << ", mvaa " << r.l_mvaa
          << ", cv " << r.l_cv << ")  lr " << r.lr << "\n";
    }
    if (tc.checkpoint_interval > 0 && r.step % tc.checkpoint_interval == 0) {
      save();
      saved_last = true;
    }
  }
  if (!saved_last) save();

  const MetricReport rep = evaluate(model, held.sequences, tc, eval_config_from(rc), rc.get_double("eval.score_threshold"));
  write_report(root, "metrics", rep);
  if (rc.get_bool("eval.pr_plot")) write_pr_plots(root, rep);
  out << rep.to_text();
  return kOk;
}

// -- eval -----------------------------------------------------------------------------------------

int cmd_eval(const Common& c, const std::string& data, const std::string& checkpoint, const std::string& split,
             std::ostream& out, std::ostream& err) {
  const RunConfig rc = build_config(c);
  const CheckpointData ck = read_checkpoint(fs::path(checkpoint));
  require_compatible(ck, rc);
  const fs::path root(c.out);
  fs::create_directories(root);
  write_effective_config(root, rc);

  Model model(model_config_from(rc));
  restore_checkpoint(ck, model.params(), nullptr);
  const Split s = load_split(fs::path(data) / split, rc.get_double("data.max_corrupt_fraction"), err);
  const MetricReport rep = evaluate(model, s.sequences, train_config_from(rc), eval_config_from(rc),
                                    rc.get_double("eval.score_threshold"));
  write_report(root, "report", rep);
  if (rc.get_bool("eval.pr_plot")) write_pr_plots(root, rep);
  out << rep.to_text();
  return kOk;
}

// -- bench-nms ------------------------------------------------------------------------------------

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

struct BenchRow {
  int size = 0, kernel = 0;
  double maxpool_ms = 0, sequential_ms = 0;
  bool top1_match = false;
};

int cmd_bench_nms(const Common& c, const std::vector<int>& sizes, const std::vector<int>& kernels, int repeats,
                  int num_out, double iou_threshold, std::ostream& out) {
  const RunConfig rc = build_config(c);
  if (repeats < 1 || num_out < 1) throw std::invalid_argument("--repeats and --num-out must be >= 1");
  std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(rc.get_int64("seed")), 11, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const FsdBoxCoder coder;
  const double cell = 0.3;

  std::vector<BenchRow> rows;
  for (int size : sizes) {
    if (size < 1) throw std::invalid_argument("map sizes must be positive");
    const int n = size * size;
    std::vector<Box7> boxes(n);
    for (int i = 0; i < n; ++i) {
      boxes[i] = Box7((i / size + 0.5) * cell, (i % size + 0.5) * cell, coder.prior_z, coder.prior_length,
                      coder.prior_width, coder.prior_height, (2 * unit(rng) - 1) * kPi);
    }
    std::vector<double> scores(n);
    for (auto& s : scores) s = unit(rng);
    // single smooth peak at a non-grid position, so the argmax is unique
    const double pr = unit(rng) * (size - 1), pc = unit(rng) * (size - 1);
    std::vector<double> bump(n);
    for (int i = 0; i < n; ++i) bump[i] = -(std::pow(i / size - pr, 2) + std::pow(i % size - pc, 2));

    for (int k : kernels) {
      if (k > size) continue;
      BenchRow row;
      row.size = size;
      row.kernel = k;
      row.maxpool_ms = best_ms(repeats, [&] { (void)maxpool_nms(scores, size, size, k, num_out); });
      row.sequential_ms = best_ms(repeats, [&] { (void)sequential_nms(boxes, scores, iou_threshold, num_out); });
      const PeakSet mp = maxpool_nms(bump, size, size, k, 1);
      const auto sq = sequential_nms(boxes, bump, iou_threshold, 1);
      row.top1_match = !sq.empty() && mp.index[0] == sq[0];
      rows.push_back(row);
    }
  }

  std::ostringstream table, csv;
  table << std::fixed << std::setprecision(3);
  table << std::setw(8) << "size" << std::setw(10) << "locations" << std::setw(8) << "kernel" << std::setw(14)
        << "maxpool_ms" << std::setw(16) << "sequential_ms" << std::setw(10) << "ratio" << std::setw(8) << "top1"
        << "\n";
  csv << "size,locations,kernel,maxpool_ms,sequential_ms,ratio,top1_match\n" << std::setprecision(9);
  bool all_match = true;
  for (const auto& r : rows) {
    const double ratio = r.sequential_ms / r.maxpool_ms;
    all_match = all_match && r.top1_match;
    table << std::setw(8) << r.size << std::setw(10) << r.size * r.size << std::setw(8) << r.kernel << std::setw(14)
          << r.maxpool_ms << std::setw(16) << r.sequential_ms << std::setw(10) << ratio << std::setw(8)
          << (r.top1_match ? "ok" : "DIFF") << "\n";
    csv << r.size << "," << r.size * r.size << "," << r.kernel << "," << r.maxpool_ms << "," << r.sequential_ms
        << "," << ratio << "," << (r.top1_match ? 1 : 0) << "\n";
  }
  table << "sequential NMS: BEV IoU > " << iou_threshold << ", both capped at " << num_out
        << " outputs; reference ratio: up to 6x at ~200k locations\n";
  out << table.str();
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "bench_nms.csv", csv.str());
    write_text(fs::path(c.out) / "bench_nms.txt", table.str());
    write_effective_config(c.out, rc);
  }
  if (!all_match) {
    out << "top-1 mismatch between maxpool_nms and sequential_nms\n";
    return kNumericalAbort;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"m3d: synthetic multi-frame 3D detection"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, bench_c;
  auto* gen = app.add_subcommand("generate", "write synthetic sequence files and a manifest");
  add_common(gen, gen_c, true);

  std::string train_data, resume;
  auto* train = app.add_subcommand("train", "train a model; writes checkpoints, train.jsonl and held-out metrics");
  add_common(train, train_c, true);
  train->add_option("--data", train_data, "directory written by generate")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");

  std::string eval_data, checkpoint, split = "eval";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; writes report.txt and report.json");
  add_common(eval, eval_c, true);
  eval->add_option("--data", eval_data, "directory written by generate")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "subdirectory of --data to evaluate");

  std::vector<int> sizes = {64, 256, 448}, kernels = {7};
  int repeats = 3, num_out = 128;
  double iou_threshold = 0.5;
  auto* bench = app.add_subcommand("bench-nms", "time maxpool_nms against sequential NMS");
  add_common(bench, bench_c, false);
  bench->add_option("--sizes", sizes, "square map sides")->delimiter(',');
  bench->add_option("--kernels", kernels, "pooling windows")->delimiter(',');
  bench->add_option("--repeats", repeats, "timing repetitions (best is kept)");
  bench->add_option("--num-out", num_out, "selected locations");
  bench->add_option("--iou", iou_threshold, "sequential NMS suppression threshold");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_c, out);
    if (train->parsed()) return cmd_train(train_c, train_data, resume, out, err);
    if (eval->parsed()) return cmd_eval(eval_c, eval_data, checkpoint, split, out, err);
    if (bench->parsed()) return cmd_bench_nms(bench_c, sizes, kernels, repeats, num_out, iou_threshold, out);
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kNumericalAbort;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::runtime_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace m3d::cli
