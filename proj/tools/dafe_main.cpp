// dafe: train, translate, probe and evaluate DAFE domain-adaptation models.
//
// Exit codes are a stable scripting contract: 0 success, 2 usage error,
// 3 configuration or data error, 4 numerical failure during training.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dafe/checkpoint.hpp"
#include "dafe/config.hpp"
#include "dafe/evaluation.hpp"
#include "dafe/toy.hpp"

namespace {

using namespace dafe;

const std::vector<std::string> kStrategyNames = {
    "baseline", "copy", "back", "dafe_wo_embed",
    "dafe",     "back_plus_dafe", "back_dafe", "back_dafe_plus_dafe"};

Sentence encode_line(const Vocabulary& vocab, const std::string& line,
                     std::size_t max_len) {
  Sentence s = vocab.encode(line);
  if (s.size() > max_len) s.resize(max_len);
  return s;
}

void cmd_train(const std::string& config_path, const std::string& strategy,
               const std::string& stem, std::string metrics_path,
               const std::vector<std::string>& sets) {
  RunConfig rc = load_run_config(config_path, sets);
  LoadedCorpora corpora = load_corpora(rc);
  TrainConfig tcfg = rc.train;
  if (tcfg.ckpt_every > 0 && tcfg.ckpt_stem.empty()) tcfg.ckpt_stem = stem;
  if (metrics_path.empty()) metrics_path = stem + ".metrics";

  PipelineResult res = run_pipeline(strategy_from_name(strategy),
                                    corpora.inputs, rc.model, tcfg,
                                    metrics_path);
  save_checkpoint(*res.model, stem + ".ckpt");
  if (res.reverse) save_checkpoint(*res.reverse, stem + ".reverse.ckpt");
  if (res.has_synthetic) {
    save_parallel(res.synthetic, corpora.vocab, stem + ".synthetic",
                  stem + ".reverse.ckpt");
  }
  std::printf("strategy=%s rounds_run=%zu stopped_early=%d best_round=%zu\n",
              strategy.c_str(), res.summary.rounds_run,
              res.summary.stopped_early ? 1 : 0, res.summary.best_round);
  std::fprintf(stderr, "wall_seconds=%.3f\n", res.summary.wall_seconds);
}

void cmd_translate(const std::string& ckpt, const std::string& input,
                   const std::string& output, const std::string& domain,
                   std::size_t max_steps) {
  auto bundle = load_checkpoint(ckpt);
  const Domain d = domain_from_name(domain);
  const std::size_t cap =
      max_steps ? max_steps : bundle->model->config().max_len;
  std::ifstream in(input);
  if (!in) throw DataError("cannot open input file " + input);
  std::vector<std::string> out_lines;
  std::string line;
  while (std::getline(in, line)) {
    Sentence src = encode_line(bundle->vocab, line,
                               bundle->model->config().max_len);
    if (src.empty()) {
      out_lines.emplace_back();
      continue;
    }
    Sentence hyp = bundle->model->greedy_decode(src, d, cap).tokens;
    out_lines.push_back(bundle->vocab.decode(hyp, true));
  }
  write_lines(output, out_lines);
}

void cmd_backtranslate(const std::string& ckpt, const std::string& mono_path,
                       const std::string& stem, const std::string& domain,
                       std::size_t max_steps) {
  auto bundle = load_checkpoint(ckpt);
  if (bundle->direction != "reverse") {
    throw ConfigError("checkpoint " + ckpt + " records direction '" +
                      bundle->direction +
                      "'; back-translation needs a reverse (target-to-source) "
                      "model");
  }
  MonolingualCorpus mono =
      load_mono(mono_path, bundle->vocab, domain_from_name(domain));
  const std::size_t cap =
      max_steps ? max_steps : bundle->model->config().max_len;
  ParallelCorpus synth = back_translate(mono, *bundle, cap);
  save_parallel(synth, bundle->vocab, stem, ckpt);
  std::printf("pairs=%zu\n", synth.size());
}

void cmd_evaluate(const std::string& ckpt, const std::string& src_path,
                  const std::string& ref_path,
                  const std::vector<std::string>& domains, bool smoothed,
                  std::size_t max_steps) {
  auto bundle = load_checkpoint(ckpt);
  ParallelCorpus test =
      load_parallel(src_path, ref_path, bundle->vocab, Domain::kIn);
  for (const std::string& name : domains) {
    const Domain d = domain_from_name(name);
    BleuReport r = evaluate_model(*bundle, test, d, smoothed, max_steps);
    std::printf("domain=%s %s\n", name.c_str(), report_record(r).c_str());
    std::fprintf(stderr, "%s: %s\n", name.c_str(), format_report(r).c_str());
  }
}

void cmd_probe(const std::string& ckpt, const std::string& input,
               const std::string& output,
               const std::vector<std::string>& domains,
               std::size_t max_steps) {
  auto bundle = load_checkpoint(ckpt);
  std::vector<Domain> ds;
  for (const std::string& name : domains) ds.push_back(domain_from_name(name));
  const std::size_t cap =
      max_steps ? max_steps : bundle->model->config().max_len;
  std::ifstream in(input);
  if (!in) throw DataError("cannot open input file " + input);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw DataError("cannot open output file " + output);
  }
  std::ostream& out = output.empty() ? std::cout : file;
  std::string line;
  while (std::getline(in, line)) {
    Sentence src = encode_line(bundle->vocab, line,
                               bundle->model->config().max_len);
    if (src.empty()) continue;
    auto rows = probe_swap(*bundle->model, src, ds, cap);
    for (Domain d : ds) {
      out << domain_name(d) << "\t" << bundle->vocab.decode(rows.at(d), true)
          << "\n";
    }
  }
}

void cmd_sweep(const std::string& config_path,
               const std::vector<double>& fractions,
               const std::vector<std::string>& strategies,
               const std::string& out_path, bool unsmoothed,
               const std::vector<std::string>& sets) {
  RunConfig rc = load_run_config(config_path, sets);
  LoadedCorpora corpora = load_corpora(rc);
  SweepConfig scfg;
  scfg.fractions = fractions;
  scfg.strategies.clear();
  for (const std::string& s : strategies) {
    scfg.strategies.push_back(strategy_from_name(s));
  }
  scfg.smoothed = !unsmoothed;
  SweepTable table =
      low_resource_sweep(corpora.inputs, rc.model, rc.train, scfg);
  if (out_path.empty()) {
    write_sweep_tsv(table, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot open output file " + out_path);
    write_sweep_tsv(table, out);
  }
}

void cmd_make_data(const std::string& dir, const ToySpec& spec) {
  ToyData data = make_toy_task(spec);
  write_toy_task(data, dir);
  const ModelConfig mcfg = toy_model_config(spec);
  std::ofstream cfg(dir + "/toy.cfg");
  if (!cfg) throw DataError("cannot write " + dir + "/toy.cfg");
  cfg << "# generated toy ambiguity task\n"
      << "model.num_layers = " << mcfg.num_layers << "\n"
      << "model.hidden_size = " << mcfg.hidden_size << "\n"
      << "model.num_heads = " << mcfg.num_heads << "\n"
      << "model.ff_size = " << mcfg.ff_size << "\n"
      << "model.vocab_size = " << mcfg.vocab_size << "\n"
      << "model.max_len = " << mcfg.max_len << "\n"
      << "noise.p_drop = 0.25\n"
      << "noise.k = 3\n"
      << "train.rounds = 2000\n"
      << "train.batch_size = 8\n"
      << "train.mix_in_lm = 2\n"
      << "train.eval_every = 50\n"
      // the ambiguity task needs the full round budget: dev loss flattens
      // long before the domain embeddings finish separating the senses
      << "train.patience = 0\n"
      << "train.seed = " << spec.seed << "\n"
      << "data.out_mt_src = " << dir << "/out_mt.src\n"
      << "data.out_mt_tgt = " << dir << "/out_mt.tgt\n"
      << "data.in_mono = " << dir << "/in_mono.txt\n"
      << "data.out_mono = " << dir << "/out_mono.txt\n"
      << "data.dev_src = " << dir << "/dev.src\n"
      << "data.dev_tgt = " << dir << "/dev.tgt\n"
      << "data.test_src = " << dir << "/test.src\n"
      << "data.test_tgt = " << dir << "/test.tgt\n";
  std::printf("wrote %s (config: %s/toy.cfg)\n", dir.c_str(), dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAFE domain-adaptation workbench for NMT"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run a full training pipeline");
  std::string t_config, t_strategy, t_stem = "run", t_metrics;
  std::vector<std::string> t_sets;
  train->add_option("--config", t_config, "run config file")->required();
  train->add_option("--strategy", t_strategy, "training strategy")
      ->required()
      ->check(CLI::IsMember(kStrategyNames));
  train->add_option("--out", t_stem, "output stem for checkpoint/metrics");
  train->add_option("--metrics", t_metrics, "metrics log path");
  train->add_option("--set", t_sets, "config override key=value");

  // translate
  auto* translate = app.add_subcommand("translate", "Decode a source file");
  std::string x_ckpt, x_input, x_output, x_domain;
  std::size_t x_steps = 0;
  translate->add_option("--checkpoint", x_ckpt)->required();
  translate->add_option("--input", x_input)->required();
  translate->add_option("--output", x_output)->required();
  translate->add_option("--domain", x_domain, "decoding domain")
      ->required()
      ->check(CLI::IsMember({"in", "out"}));
  translate->add_option("--max-steps", x_steps);

  // backtranslate
  auto* bt = app.add_subcommand("backtranslate",
                                "Synthesize parallel data from monolingual "
                                "text with a reverse model");
  std::string b_ckpt, b_mono, b_stem, b_domain = "in";
  std::size_t b_steps = 0;
  bt->add_option("--checkpoint", b_ckpt)->required();
  bt->add_option("--mono", b_mono)->required();
  bt->add_option("--out", b_stem, "output stem (.src/.tgt/.meta)")->required();
  bt->add_option("--domain", b_domain, "domain label of the mono corpus")
      ->check(CLI::IsMember({"in", "out"}));
  bt->add_option("--max-steps", b_steps);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint with BLEU");
  std::string e_ckpt, e_src, e_ref;
  std::vector<std::string> e_domains = {"in"};
  bool e_smoothed = false;
  std::size_t e_steps = 0;
  ev->add_option("--checkpoint", e_ckpt)->required();
  ev->add_option("--src", e_src)->required();
  ev->add_option("--ref", e_ref)->required();
  ev->add_option("--domains", e_domains, "domains to decode with")
      ->delimiter(',')
      ->check(CLI::IsMember({"in", "out"}));
  ev->add_flag("--smoothed", e_smoothed, "add-one smoothing for tiny sets");
  ev->add_option("--max-steps", e_steps);

  // probe
  auto* probe = app.add_subcommand(
      "probe", "Decode the same input under several domain embeddings");
  std::string p_ckpt, p_input, p_output;
  std::vector<std::string> p_domains = {"in", "out"};
  std::size_t p_steps = 0;
  probe->add_option("--checkpoint", p_ckpt)->required();
  probe->add_option("--input", p_input)->required();
  probe->add_option("--output", p_output, "default: stdout");
  probe->add_option("--domains", p_domains)
      ->delimiter(',')
      ->check(CLI::IsMember({"in", "out"}));
  probe->add_option("--max-steps", p_steps);

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "Low-resource sweep over parallel-data fractions");
  std::string s_config, s_out;
  std::vector<double> s_fractions;
  std::vector<std::string> s_strategies = {"back", "dafe"};
  std::vector<std::string> s_sets;
  bool s_unsmoothed = false;
  sweep->add_option("--config", s_config)->required();
  sweep->add_option("--fractions", s_fractions, "fractions in (0,1]")
      ->required()
      ->delimiter(',');
  sweep->add_option("--strategies", s_strategies)
      ->delimiter(',')
      ->check(CLI::IsMember(kStrategyNames));
  sweep->add_option("--out", s_out, "TSV output path (default: stdout)");
  sweep->add_flag("--unsmoothed", s_unsmoothed);
  sweep->add_option("--set", s_sets, "config override key=value");

  // make-data
  auto* md = app.add_subcommand("make-data",
                                "Generate the synthetic ambiguity task");
  std::string m_dir;
  ToySpec m_spec;
  md->add_option("--out", m_dir, "output directory")->required();
  md->add_option("--seed", m_spec.seed, "generation seed")->required();
  md->add_option("--train", m_spec.n_train);
  md->add_option("--mono", m_spec.n_mono);
  md->add_option("--dev", m_spec.n_dev);
  md->add_option("--test", m_spec.n_test);
  md->add_option("--amb-prob", m_spec.parallel_amb_prob,
                 "share of parallel pairs with ambiguous tokens");

  int rc = 0;
  auto guard = [&rc](auto fn) {
    return [&rc, fn] {
      try {
        fn();
      } catch (const dafe::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        rc = 4;
      } catch (const dafe::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        rc = 3;
      }
    };
  };
  train->callback(guard([&] {
    cmd_train(t_config, t_strategy, t_stem, t_metrics, t_sets);
  }));
  translate->callback(guard([&] {
    cmd_translate(x_ckpt, x_input, x_output, x_domain, x_steps);
  }));
  bt->callback(guard([&] {
    cmd_backtranslate(b_ckpt, b_mono, b_stem, b_domain, b_steps);
  }));
  ev->callback(guard([&] {
    cmd_evaluate(e_ckpt, e_src, e_ref, e_domains, e_smoothed, e_steps);
  }));
  probe->callback(guard([&] {
    cmd_probe(p_ckpt, p_input, p_output, p_domains, p_steps);
  }));
  sweep->callback(guard([&] {
    cmd_sweep(s_config, s_fractions, s_strategies, s_out, s_unsmoothed, s_sets);
  }));
  md->callback(guard([&] { cmd_make_data(m_dir, m_spec); }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return rc;
}
