// Command-line entry point chaining the measurement pipeline stages:
//   synth | demod | preprocess | extract | select | train | evaluate |
//   report | pipeline | summary | replay
// Every run writes a manifest (resolved parameters + seed + version) next to
// its outputs; `replay <manifest>` reruns a command from that file alone.

#include "biozbp/demod.hpp"
#include "biozbp/features.hpp"
#include "biozbp/fiducial.hpp"
#include "biozbp/io.hpp"
#include "biozbp/pipeline.hpp"
#include "biozbp/threading.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace biozbp;

namespace {

constexpr const char* kVersion = "biozbp 1.0.0";

json pipeline_config_to_json(const pipeline::PipelineConfig& c) {
  json j;
  j["corpus"] = {{"n_subjects", c.corpus.n_subjects},
                 {"trials_per_subject", c.corpus.trials_per_subject},
                 {"duration_s", c.corpus.duration_s},
                 {"seed", c.corpus.seed},
                 {"ptt_min_s", c.corpus.ptt_min_s},
                 {"ptt_max_s", c.corpus.ptt_max_s},
                 {"ptt_trial_jitter_s", c.corpus.ptt_trial_jitter_s},
                 {"hr_min_bpm", c.corpus.hr_min_bpm},
                 {"hr_max_bpm", c.corpus.hr_max_bpm},
                 {"hr_trial_jitter_bpm", c.corpus.hr_trial_jitter_bpm}};
  j["base"] = {{"z_baseline_ohm", c.corpus.base.z_baseline_ohm},
               {"delta_z_ohm", c.corpus.base.delta_z_ohm},
               {"systolic_fraction", c.corpus.base.systolic_fraction},
               {"respiration_amp_ohm", c.corpus.base.respiration_amp_ohm},
               {"respiration_freq_hz", c.corpus.base.respiration_freq_hz},
               {"noise_enabled", c.corpus.base.noise_enabled},
               {"noise_snr_db", c.corpus.base.noise_snr_db},
               {"sample_rate_hz", c.corpus.base.sample_rate_hz},
               {"excitation_freq_hz", c.corpus.base.excitation_freq_hz},
               {"r0_ohm", c.corpus.base.r0_ohm},
               {"sbp_law",
                {c.corpus.base.sbp_law.intercept_mmhg,
                 c.corpus.base.sbp_law.ptt_slope_mmhg_per_s,
                 c.corpus.base.sbp_law.hr_slope_mmhg_per_bpm,
                 c.corpus.base.sbp_law.noise_sd_mmhg}},
               {"dbp_law",
                {c.corpus.base.dbp_law.intercept_mmhg,
                 c.corpus.base.dbp_law.ptt_slope_mmhg_per_s,
                 c.corpus.base.dbp_law.hr_slope_mmhg_per_bpm,
                 c.corpus.base.dbp_law.noise_sd_mmhg}}};
  j["data_dir"] = c.data_dir;
  j["raw_format"] = c.raw_format;
  j["n_block"] = c.n_block;
  j["fir"] = {{"order", c.fir.order},
              {"low_hz", c.fir.low_hz},
              {"high_hz", c.fir.high_hz}};
  j["sg"] = {{"poly_order", c.sg.poly_order}, {"window_len", c.sg.window_len}};
  j["window"] = {{"window_s", c.window.window_s},
                 {"overlap_fraction", c.window.overlap_fraction}};
  j["detrend"] = c.detrend;
  j["select_method"] = c.select_method;
  j["select_k"] = c.select_k;
  j["select_seed"] = c.select_seed;
  j["model"] = regress::model_kind_name(c.model);
  j["forest"] = {{"n_trees", c.forest.n_trees},
                 {"min_samples_leaf", c.forest.min_samples_leaf},
                 {"max_depth", c.forest.max_depth},
                 {"mtry", c.forest.mtry},
                 {"bootstrap", c.forest.bootstrap},
                 {"seed", c.forest.seed}};
  j["svr"] = {{"c", c.svr.c},
              {"epsilon", c.svr.epsilon},
              {"gamma", c.svr.gamma},
              {"tol", c.svr.tol},
              {"max_passes", c.svr.max_passes}};
  j["cv_folds"] = c.cv_folds;
  j["cv_seed"] = c.cv_seed;
  j["split_unit"] = eval::split_unit_name(c.split_unit);
  j["threads"] = c.threads;
  return j;
}

pipeline::PipelineConfig pipeline_config_from_json(const json& j) {
  pipeline::PipelineConfig c;
  const json& co = j.at("corpus");
  c.corpus.n_subjects = co.at("n_subjects").get<int>();
  c.corpus.trials_per_subject = co.at("trials_per_subject").get<int>();
  c.corpus.duration_s = co.at("duration_s").get<double>();
  c.corpus.seed = co.at("seed").get<std::uint64_t>();
  c.corpus.ptt_min_s = co.at("ptt_min_s").get<double>();
  c.corpus.ptt_max_s = co.at("ptt_max_s").get<double>();
  c.corpus.ptt_trial_jitter_s = co.at("ptt_trial_jitter_s").get<double>();
  c.corpus.hr_min_bpm = co.at("hr_min_bpm").get<double>();
  c.corpus.hr_max_bpm = co.at("hr_max_bpm").get<double>();
  c.corpus.hr_trial_jitter_bpm = co.at("hr_trial_jitter_bpm").get<double>();
  const json& b = j.at("base");
  c.corpus.base.z_baseline_ohm = b.at("z_baseline_ohm").get<double>();
  c.corpus.base.delta_z_ohm = b.at("delta_z_ohm").get<double>();
  c.corpus.base.systolic_fraction = b.at("systolic_fraction").get<double>();
  c.corpus.base.respiration_amp_ohm = b.at("respiration_amp_ohm").get<double>();
  c.corpus.base.respiration_freq_hz = b.at("respiration_freq_hz").get<double>();
  c.corpus.base.noise_enabled = b.at("noise_enabled").get<bool>();
  c.corpus.base.noise_snr_db = b.at("noise_snr_db").get<double>();
  c.corpus.base.sample_rate_hz = b.at("sample_rate_hz").get<double>();
  c.corpus.base.excitation_freq_hz = b.at("excitation_freq_hz").get<double>();
  c.corpus.base.r0_ohm = b.at("r0_ohm").get<double>();
  auto law = [](const json& a) {
    return synth::BpLaw{a[0].get<double>(), a[1].get<double>(),
                        a[2].get<double>(), a[3].get<double>()};
  };
  c.corpus.base.sbp_law = law(b.at("sbp_law"));
  c.corpus.base.dbp_law = law(b.at("dbp_law"));
  c.data_dir = j.at("data_dir").get<std::string>();
  c.raw_format = j.at("raw_format").get<std::string>();
  c.n_block = j.at("n_block").get<int>();
  c.fir.order = j.at("fir").at("order").get<int>();
  c.fir.low_hz = j.at("fir").at("low_hz").get<double>();
  c.fir.high_hz = j.at("fir").at("high_hz").get<double>();
  c.sg.poly_order = j.at("sg").at("poly_order").get<int>();
  c.sg.window_len = j.at("sg").at("window_len").get<Eigen::Index>();
  c.window.window_s = j.at("window").at("window_s").get<double>();
  c.window.overlap_fraction = j.at("window").at("overlap_fraction").get<double>();
  c.detrend = j.at("detrend").get<bool>();
  c.select_method = j.at("select_method").get<std::string>();
  c.select_k = j.at("select_k").get<int>();
  c.select_seed = j.at("select_seed").get<std::uint64_t>();
  c.model = regress::model_kind_from_name(j.at("model").get<std::string>());
  const json& f = j.at("forest");
  c.forest.n_trees = f.at("n_trees").get<int>();
  c.forest.min_samples_leaf = f.at("min_samples_leaf").get<int>();
  c.forest.max_depth = f.at("max_depth").get<int>();
  c.forest.mtry = f.at("mtry").get<int>();
  c.forest.bootstrap = f.at("bootstrap").get<bool>();
  c.forest.seed = f.at("seed").get<std::uint64_t>();
  const json& s = j.at("svr");
  c.svr.c = s.at("c").get<double>();
  c.svr.epsilon = s.at("epsilon").get<double>();
  c.svr.gamma = s.at("gamma").get<double>();
  c.svr.tol = s.at("tol").get<double>();
  c.svr.max_passes = s.at("max_passes").get<long>();
  c.cv_folds = j.at("cv_folds").get<int>();
  c.cv_seed = j.at("cv_seed").get<std::uint64_t>();
  c.split_unit = eval::split_unit_from_name(j.at("split_unit").get<std::string>());
  c.threads = j.at("threads").get<int>();
  return c;
}

void write_manifest(const std::string& path, const std::string& command,
                    const json& params) {
  json j;
  j["format"] = "biozbp-manifest-v1";
  j["version"] = kVersion;
  j["command"] = command;
  j["params"] = params;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cli", "cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<Target> parse_targets(const std::string& t) {
  if (t == "sbp") return {Target::Sbp};
  if (t == "dbp") return {Target::Dbp};
  if (t == "both") return {Target::Sbp, Target::Dbp};
  throw Error(ErrorCode::BadUsage, "cli", "target must be sbp, dbp or both");
}

// ---------------------------------------------------------------------------
// Command implementations (each callable from flags or from a manifest).
// ---------------------------------------------------------------------------

int cmd_synth(const json& p) {
  pipeline::CorpusConfig corpus;
  corpus.n_subjects = p.at("subjects").get<int>();
  corpus.trials_per_subject = p.at("trials").get<int>();
  corpus.duration_s = p.at("duration_s").get<double>();
  corpus.seed = p.at("seed").get<std::uint64_t>();
  corpus.base.noise_enabled = p.at("noise_enabled").get<bool>();
  corpus.base.noise_snr_db = p.at("noise_snr_db").get<double>();
  corpus.base.sbp_law.noise_sd_mmhg = p.at("label_noise_sd").get<double>();
  corpus.base.dbp_law.noise_sd_mmhg = p.at("label_noise_sd").get<double>();
  const std::string out_dir = p.at("out_dir").get<std::string>();
  const io::Format fmt = io::format_from_name(p.at("format").get<std::string>());

  fs::create_directories(out_dir);
  const auto configs = pipeline::corpus_configs(corpus);
  std::vector<io::TrialLabel> labels(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    auto [rec, truth] = synth::generate(configs[i], corpus.duration_s);
    const std::string stem =
        out_dir + "/" + rec.subject_id + "_" + rec.trial_id;
    io::save_raw(rec, stem + (fmt == io::Format::Csv ? ".csv" : ".bin"), fmt);
    io::save_ground_truth(truth, stem + "_truth.json");
    labels[i] = {rec.subject_id, rec.trial_id, truth.true_sbp_mmhg.front(),
                 truth.true_dbp_mmhg.front()};
  });
  io::save_labels(labels, out_dir + "/labels.csv");
  write_manifest(out_dir + "/manifest_synth.json", "synth", p);
  std::cout << "wrote " << configs.size() << " trials to " << out_dir << "\n";
  return 0;
}

int cmd_demod(const json& p) {
  const std::string in = p.at("input").get<std::string>();
  const std::string prefix = p.at("out_prefix").get<std::string>();
  const io::Format fmt = io::format_from_name(p.at("format").get<std::string>());
  RawRecording rec = io::load_raw(in, fmt);
  if (p.at("excitation_freq_hz").get<double>() > 0.0) {
    rec.excitation_freq_hz = p.at("excitation_freq_hz").get<double>();
  }
  auto out = demod::demodulate(rec, p.at("n_block").get<int>());
  const std::string kinds = p.at("kinds").get<std::string>();
  if (kinds.find("abs") != std::string::npos) {
    io::save_series(out.biz_abs, prefix + "_biz_abs.csv");
  }
  if (kinds.find("real") != std::string::npos) {
    io::save_series(out.biz_real, prefix + "_biz_real.csv");
  }
  if (kinds.find("imag") != std::string::npos) {
    io::save_series(out.biz_imag, prefix + "_biz_imag.csv");
  }
  io::save_series(out.ecg_500, prefix + "_ecg.csv");
  write_manifest(prefix + "_manifest_demod.json", "demod", p);
  return 0;
}

int cmd_preprocess(const json& p) {
  const std::string prefix = p.at("out_prefix").get<std::string>();
  preprocess::FirSpec fir;
  fir.order = p.at("fir_order").get<int>();
  fir.low_hz = p.at("fir_low_hz").get<double>();
  fir.high_hz = p.at("fir_high_hz").get<double>();
  preprocess::SgSpec sg;
  sg.poly_order = p.at("sg_order").get<int>();
  sg.window_len = p.at("sg_window").get<Eigen::Index>();
  const bool detrend = p.at("detrend").get<bool>();

  auto run = [&](const std::string& in, const std::string& out) {
    ProcessedSeries s = io::load_series(in);
    preprocess::FirSpec f = fir;
    f.sample_rate_hz = s.sample_rate_hz;
    s = preprocess::apply_fir(s, preprocess::design_fir(f));
    s = preprocess::apply_sg(
        s, sg, detrend ? preprocess::SgMode::Detrend : preprocess::SgMode::Smooth);
    io::save_series(s, out);
  };
  run(p.at("biz").get<std::string>(), prefix + "_biz.csv");
  if (!p.at("ecg").get<std::string>().empty()) {
    run(p.at("ecg").get<std::string>(), prefix + "_ecg.csv");
  }
  write_manifest(prefix + "_manifest_preprocess.json", "preprocess", p);
  return 0;
}

int cmd_extract(const json& p) {
  preprocess::WindowSpec window;
  window.window_s = p.at("window_s").get<double>();
  window.overlap_fraction = p.at("overlap").get<double>();

  std::vector<LabeledSegment> all;
  auto add_trial = [&](const std::string& biz_path, const std::string& ecg_path,
                       double sbp, double dbp, const std::string& group) {
    ProcessedSeries biz = io::load_series(biz_path);
    ProcessedSeries ecg = io::load_series(ecg_path);
    auto segs = preprocess::segment(biz, ecg, sbp, dbp, window, group);
    for (auto& s : segs) all.push_back(std::move(s));
  };

  if (!p.at("list").get<std::string>().empty()) {
    std::ifstream in(p.at("list").get<std::string>());
    if (!in) {
      throw Error(ErrorCode::IoFailure, "cli",
                  "cannot read " + p.at("list").get<std::string>());
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ss(line);
      std::string biz, ecg, sbp, dbp, group;
      if (!std::getline(ss, biz, ',') || !std::getline(ss, ecg, ',') ||
          !std::getline(ss, sbp, ',') || !std::getline(ss, dbp, ',') ||
          !std::getline(ss, group)) {
        throw Error(ErrorCode::BadUsage, "cli", "bad list row: " + line);
      }
      add_trial(biz, ecg, std::stod(sbp), std::stod(dbp), group);
    }
  } else {
    add_trial(p.at("biz").get<std::string>(), p.at("ecg").get<std::string>(),
              p.at("sbp").get<double>(), p.at("dbp").get<double>(),
              p.at("group").get<std::string>());
  }

  const std::string cycles_out = p.at("cycles_out").get<std::string>();
  if (!cycles_out.empty()) {
    std::vector<fiducial::CycleFiducials> cycles;
    for (const auto& seg : all) {
      try {
        auto r_times = fiducial::detect_r_peaks(seg.ecg);
        auto cs = fiducial::detect_cycle_fiducials(seg.biz, r_times);
        cycles.insert(cycles.end(), cs.begin(), cs.end());
      } catch (const Error&) {
        // segments without detectable beats contribute no rows
      }
    }
    fiducial::export_cycles_csv(cycles_out, cycles);
  }

  FeatureTable table = pipeline::extract_table(all);
  table.provenance = "extract(window_s=" + std::to_string(window.window_s) +
                     ",overlap=" + std::to_string(window.overlap_fraction) +
                     ",entropy_m=2,entropy_r=0.2sd)";
  const std::string out = p.at("output").get<std::string>();
  io::save_feature_table(table, out);
  write_manifest(out + ".manifest.json", "extract", p);
  std::cout << "extracted " << table.rows() << " rows ("
            << table.valid_count() << " valid) -> " << out << "\n";
  return 0;
}

int cmd_select(const json& p) {
  FeatureTable table = io::load_feature_table(p.at("table").get<std::string>());
  const auto method = featsel::method_from_name(p.at("method").get<std::string>());
  const Target target = parse_targets(p.at("target").get<std::string>()).front();
  const std::uint64_t seed = p.at("seed").get<std::uint64_t>();
  regress::ForestConfig forest;
  forest.n_trees = p.at("n_trees").get<int>();

  featsel::RankedFeatureSet ranking;
  switch (method) {
    case featsel::Method::Pcc:
      ranking = featsel::rank_pcc(table, target);
      break;
    case featsel::Method::RfImpurity:
      ranking = featsel::rank_impurity(table, target, forest, seed);
      break;
    case featsel::Method::Combined:
      ranking = featsel::combined_ranking(
          featsel::rank_pcc(table, target),
          featsel::rank_impurity(table, target, forest, seed));
      break;
  }
  featsel::save_ranking_csv(ranking, table.feature_names,
                            p.at("ranking_out").get<std::string>());
  const int k = p.at("k").get<int>();
  if (!p.at("output").get<std::string>().empty()) {
    FeatureTable selected = featsel::select_top_k(table, ranking, k);
    io::save_feature_table(selected, p.at("output").get<std::string>());
  }

  // Optional top-K sweep: cross-validated error as a function of K.
  const std::string grid_str = p.at("sweep_grid").get<std::string>();
  if (!grid_str.empty()) {
    std::vector<int> grid;
    std::stringstream ss(grid_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stoi(tok));
    eval::CvConfig cv;
    cv.n_folds = p.at("folds").get<int>();
    cv.shuffle_seed = seed;
    cv.target = target;
    auto curve = featsel::sweep_top_k(table, ranking, grid, forest, cv);
    const std::string path = p.at("sweep_out").get<std::string>();
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cli", "cannot write " + path);
    out << "k,mae_mmhg,rmse_mmhg\n";
    char buf[96];
    for (const auto& pt : curve) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", pt.k, pt.mae,
                    pt.rmse);
      out << buf;
    }
  }
  write_manifest(p.at("ranking_out").get<std::string>() + ".manifest.json",
                 "select", p);
  return 0;
}

int cmd_train(const json& p) {
  FeatureTable table =
      io::load_feature_table(p.at("table").get<std::string>()).valid_rows();
  const Target target = parse_targets(p.at("target").get<std::string>()).front();
  const auto kind = regress::model_kind_from_name(p.at("model").get<std::string>());
  regress::TrainedModel model;
  regress::ForestConfig forest;
  forest.n_trees = p.at("n_trees").get<int>();
  forest.seed = p.at("seed").get<std::uint64_t>();
  regress::SvrConfig svr;
  svr.c = p.at("svr_c").get<double>();
  svr.epsilon = p.at("svr_epsilon").get<double>();
  const Vector& y = target_labels(table, target);
  switch (kind) {
    case regress::ModelKind::Lr: model = regress::train_lr(table.features, y); break;
    case regress::ModelKind::Dt:
      model = regress::train_cart(table.features, y, forest);
      break;
    case regress::ModelKind::Rf:
      model = regress::train_rf(table.features, y, forest);
      break;
    case regress::ModelKind::Svr:
      model = regress::train_svr(table.features, y, svr);
      break;
  }
  model.provenance = "train(target=" + std::string(target_name(target)) +
                     ",rows=" + std::to_string(table.rows()) + ")";
  regress::save_model(model, p.at("output").get<std::string>());
  write_manifest(p.at("output").get<std::string>() + ".manifest.json", "train", p);
  return 0;
}

int cmd_evaluate(const json& p) {
  FeatureTable table = io::load_feature_table(p.at("table").get<std::string>());
  const std::string prefix = p.at("out_prefix").get<std::string>();

  const int k = p.at("k").get<int>();
  regress::ForestConfig forest;
  forest.n_trees = p.at("n_trees").get<int>();
  forest.seed = p.at("model_seed").get<std::uint64_t>();

  eval::ModelConfig model;
  model.kind = regress::model_kind_from_name(p.at("model").get<std::string>());
  model.forest = forest;
  model.svr.c = p.at("svr_c").get<double>();
  model.svr.epsilon = p.at("svr_epsilon").get<double>();

  eval::CvConfig cv;
  cv.n_folds = p.at("folds").get<int>();
  cv.shuffle_seed = p.at("cv_seed").get<std::uint64_t>();
  cv.split_unit = eval::split_unit_from_name(p.at("split_unit").get<std::string>());

  for (Target target : parse_targets(p.at("target").get<std::string>())) {
    FeatureTable working = table;
    if (k > 0) {
      auto ranking = featsel::rank_impurity(
          table, target, forest, p.at("select_seed").get<std::uint64_t>());
      const auto method =
          featsel::method_from_name(p.at("method").get<std::string>());
      if (method == featsel::Method::Pcc) {
        ranking = featsel::rank_pcc(table, target);
      } else if (method == featsel::Method::Combined) {
        ranking = featsel::combined_ranking(featsel::rank_pcc(table, target),
                                            ranking);
      }
      working = featsel::select_top_k(table, ranking, k);
    }
    cv.target = target;
    eval::EvalReport rep = eval::cross_validate(working, model, cv);
    const std::string tname = target == Target::Sbp ? "sbp" : "dbp";
    eval::save_report_json(rep, prefix + "_" + tname + "_report.json");
    eval::export_plots(rep, prefix + "_" + tname);
    std::cout << eval::render_report(rep);
  }
  write_manifest(prefix + "_manifest_evaluate.json", "evaluate", p);
  return 0;
}

int cmd_report(const json& p) {
  eval::EvalReport rep =
      eval::load_report_json(p.at("input").get<std::string>());
  std::cout << eval::render_report(rep);
  return 0;
}

int cmd_summary(const json& p) {
  FeatureTable table = io::load_feature_table(p.at("table").get<std::string>());
  io::SummaryStats stats = io::dataset_summary(table);
  io::save_summary(stats, p.at("output").get<std::string>());
  std::printf("rows=%lld valid=%lld SBP %.1f +/- %.1f mmHg, DBP %.1f +/- %.1f mmHg\n",
              static_cast<long long>(stats.n_rows),
              static_cast<long long>(stats.n_valid), stats.sbp_mean,
              stats.sbp_sd, stats.dbp_mean, stats.dbp_sd);
  return 0;
}

int cmd_pipeline(const json& p) {
  pipeline::PipelineConfig config = pipeline_config_from_json(p.at("config"));
  const std::string out_dir = p.at("out_dir").get<std::string>();
  fs::create_directories(out_dir);
  pipeline::PipelineResult result = pipeline::run_pipeline(config);

  io::save_feature_table(result.table, out_dir + "/features.csv");
  if (config.select_k > 0) {
    io::save_feature_table(result.selected, out_dir + "/features_selected.csv");
    featsel::save_ranking_csv(result.ranking, result.table.feature_names,
                              out_dir + "/ranking.csv");
  }
  io::save_summary(io::dataset_summary(result.table), out_dir + "/summary.csv");
  eval::save_report_json(result.sbp_report, out_dir + "/sbp_report.json");
  eval::save_report_json(result.dbp_report, out_dir + "/dbp_report.json");
  eval::export_plots(result.sbp_report, out_dir + "/sbp");
  eval::export_plots(result.dbp_report, out_dir + "/dbp");
  {
    std::ofstream txt(out_dir + "/report.txt");
    txt << eval::render_report(result.sbp_report)
        << eval::render_report(result.dbp_report);
  }
  write_manifest(out_dir + "/manifest_pipeline.json", "pipeline", p);
  std::cout << eval::render_report(result.sbp_report)
            << eval::render_report(result.dbp_report);
  return 0;
}

int dispatch(const std::string& command, const json& params) {
  if (command == "synth") return cmd_synth(params);
  if (command == "demod") return cmd_demod(params);
  if (command == "preprocess") return cmd_preprocess(params);
  if (command == "extract") return cmd_extract(params);
  if (command == "select") return cmd_select(params);
  if (command == "train") return cmd_train(params);
  if (command == "evaluate") return cmd_evaluate(params);
  if (command == "report") return cmd_report(params);
  if (command == "summary") return cmd_summary(params);
  if (command == "pipeline") return cmd_pipeline(params);
  throw Error(ErrorCode::BadUsage, "cli", "unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " - brain bio-impedance blood pressure estimation pipeline"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  // synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic trials");
  struct {
    int subjects = 13, trials = 10;
    double duration = 30.0, noise_snr_db = 50.0, label_noise_sd = 2.0;
    bool noise = false;
    std::uint64_t seed = 1;
    std::string out_dir = "synth_out", format = "csv";
  } sy;
  synth_cmd->add_option("--subjects", sy.subjects);
  synth_cmd->add_option("--trials", sy.trials);
  synth_cmd->add_option("--duration", sy.duration);
  synth_cmd->add_option("--seed", sy.seed);
  synth_cmd->add_flag("--noise", sy.noise, "enable carrier noise");
  synth_cmd->add_option("--noise-snr-db", sy.noise_snr_db);
  synth_cmd->add_option("--label-noise-sd", sy.label_noise_sd);
  synth_cmd->add_option("--out-dir", sy.out_dir);
  synth_cmd->add_option("--format", sy.format)
      ->check(CLI::IsMember({"csv", "bin"}));

  // demod ---------------------------------------------------------------
  auto* demod_cmd = app.add_subcommand("demod", "carrier-band demodulation");
  struct {
    std::string input, out_prefix = "demod", format = "csv", kinds = "abs";
    int n_block = 200;
    double f_exc = 0.0;
  } dm;
  demod_cmd->add_option("--in", dm.input)->required();
  demod_cmd->add_option("--out-prefix", dm.out_prefix);
  demod_cmd->add_option("--format", dm.format)
      ->check(CLI::IsMember({"csv", "bin"}));
  demod_cmd->add_option("--n-block", dm.n_block);
  demod_cmd->add_option("--excitation-freq", dm.f_exc,
                        "override the header value (Hz)");
  demod_cmd->add_option("--kinds", dm.kinds, "comma list of abs,real,imag");

  // preprocess ----------------------------------------------------------
  auto* prep_cmd = app.add_subcommand("preprocess", "FIR + SG filtering");
  struct {
    std::string biz, ecg, out_prefix = "prep";
    int fir_order = 1000, sg_order = 3;
    long sg_window = 10001;
    double fir_low = 0.5, fir_high = 10.0;
    bool smooth = false;
  } pr;
  prep_cmd->add_option("--biz", pr.biz)->required();
  prep_cmd->add_option("--ecg", pr.ecg);
  prep_cmd->add_option("--out-prefix", pr.out_prefix);
  prep_cmd->add_option("--fir-order", pr.fir_order);
  prep_cmd->add_option("--fir-low", pr.fir_low);
  prep_cmd->add_option("--fir-high", pr.fir_high);
  prep_cmd->add_option("--sg-order", pr.sg_order);
  prep_cmd->add_option("--sg-window", pr.sg_window);
  prep_cmd->add_flag("--smooth", pr.smooth,
                     "SG smoothing instead of baseline removal");

  // extract ---------------------------------------------------------------
  auto* ext_cmd = app.add_subcommand("extract", "42-feature extraction");
  struct {
    std::string biz, ecg, list, group = "s00/t00", output = "features.csv";
    std::string cycles_out;
    double sbp = 120.0, dbp = 80.0, window_s = 8.0, overlap = 0.75;
  } ex;
  ext_cmd->add_option("--biz", ex.biz);
  ext_cmd->add_option("--ecg", ex.ecg);
  ext_cmd->add_option("--list", ex.list,
                      "CSV of biz,ecg,sbp,dbp,group rows for many trials");
  ext_cmd->add_option("--sbp", ex.sbp);
  ext_cmd->add_option("--dbp", ex.dbp);
  ext_cmd->add_option("--group", ex.group);
  ext_cmd->add_option("--window", ex.window_s);
  ext_cmd->add_option("--overlap", ex.overlap);
  ext_cmd->add_option("--out", ex.output);
  ext_cmd->add_option("--cycles-out", ex.cycles_out,
                      "debug CSV of per-cycle fiducials");

  // select ----------------------------------------------------------------
  auto* sel_cmd = app.add_subcommand("select", "feature ranking / top-k");
  struct {
    std::string table, method = "impurity", target = "sbp";
    std::string output, ranking_out = "ranking.csv";
    std::string sweep_grid, sweep_out = "sweep.csv";
    int k = 10, n_trees = 500, folds = 10;
    std::uint64_t seed = 1;
  } se;
  sel_cmd->add_option("--table", se.table)->required();
  sel_cmd->add_option("--method", se.method);
  sel_cmd->add_option("--k", se.k);
  sel_cmd->add_option("--target", se.target);
  sel_cmd->add_option("--seed", se.seed);
  sel_cmd->add_option("--n-trees", se.n_trees);
  sel_cmd->add_option("--out", se.output);
  sel_cmd->add_option("--ranking-out", se.ranking_out);
  sel_cmd->add_option("--sweep-grid", se.sweep_grid,
                      "comma list of K values to cross-validate");
  sel_cmd->add_option("--sweep-out", se.sweep_out);
  sel_cmd->add_option("--folds", se.folds);

  // train -------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit one model");
  struct {
    std::string table, model = "rf", target = "sbp", output = "model.json";
    int n_trees = 500;
    std::uint64_t seed = 1;
    double svr_c = 1e3, svr_epsilon = 0.1;
  } tr;
  train_cmd->add_option("--table", tr.table)->required();
  train_cmd->add_option("--model", tr.model)
      ->check(CLI::IsMember({"lr", "dt", "rf", "svr"}));
  train_cmd->add_option("--target", tr.target);
  train_cmd->add_option("--n-trees", tr.n_trees);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--svr-c", tr.svr_c);
  train_cmd->add_option("--svr-epsilon", tr.svr_epsilon);
  train_cmd->add_option("--out", tr.output);

  // evaluate ------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "10-fold CV evaluation");
  struct {
    std::string table, model = "rf", target = "both", method = "impurity";
    std::string split_unit = "SEGMENT", out_prefix = "eval";
    int folds = 10, k = 10, n_trees = 500;
    std::uint64_t cv_seed = 1, model_seed = 1, select_seed = 1;
    double svr_c = 1e3, svr_epsilon = 0.1;
  } ev;
  eval_cmd->add_option("--table", ev.table)->required();
  eval_cmd->add_option("--model", ev.model)
      ->check(CLI::IsMember({"lr", "dt", "rf", "svr"}));
  eval_cmd->add_option("--target", ev.target);
  eval_cmd->add_option("--method", ev.method);
  eval_cmd->add_option("--k", ev.k, "top-k selection; 0 = all features");
  eval_cmd->add_option("--folds", ev.folds);
  eval_cmd->add_option("--split-unit", ev.split_unit)
      ->check(CLI::IsMember({"SEGMENT", "TRIAL", "SUBJECT"}));
  eval_cmd->add_option("--cv-seed", ev.cv_seed);
  eval_cmd->add_option("--model-seed", ev.model_seed);
  eval_cmd->add_option("--select-seed", ev.select_seed);
  eval_cmd->add_option("--n-trees", ev.n_trees);
  eval_cmd->add_option("--svr-c", ev.svr_c);
  eval_cmd->add_option("--svr-epsilon", ev.svr_epsilon);
  eval_cmd->add_option("--out-prefix", ev.out_prefix);

  // report / summary ------------------------------------------------------
  auto* rep_cmd = app.add_subcommand("report", "render a report JSON");
  std::string rep_in;
  rep_cmd->add_option("--in", rep_in)->required();

  auto* sum_cmd = app.add_subcommand("summary", "dataset label statistics");
  struct {
    std::string table, output = "summary.csv";
  } su;
  sum_cmd->add_option("--table", su.table)->required();
  sum_cmd->add_option("--out", su.output);

  // pipeline ------------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand("pipeline", "raw -> evaluation, end to end");
  struct {
    int subjects = 13, trials = 10, k = 10, folds = 10, n_trees = 500;
    double duration = 30.0, label_noise_sd = 2.0, noise_snr_db = 50.0;
    bool noise = false;
    std::uint64_t seed = 1;
    std::string model = "rf", method = "impurity", split_unit = "SEGMENT";
    std::string data_dir, out_dir = "pipeline_out", format = "csv";
  } pl;
  pipe_cmd->add_option("--subjects", pl.subjects);
  pipe_cmd->add_option("--trials", pl.trials);
  pipe_cmd->add_option("--duration", pl.duration);
  pipe_cmd->add_option("--seed", pl.seed);
  pipe_cmd->add_flag("--noise", pl.noise);
  pipe_cmd->add_option("--noise-snr-db", pl.noise_snr_db);
  pipe_cmd->add_option("--label-noise-sd", pl.label_noise_sd);
  pipe_cmd->add_option("--data-dir", pl.data_dir,
                       "use existing raw trials instead of synthesizing");
  pipe_cmd->add_option("--format", pl.format)->check(CLI::IsMember({"csv", "bin"}));
  pipe_cmd->add_option("--model", pl.model)
      ->check(CLI::IsMember({"lr", "dt", "rf", "svr"}));
  pipe_cmd->add_option("--method", pl.method);
  pipe_cmd->add_option("--k", pl.k);
  pipe_cmd->add_option("--folds", pl.folds);
  pipe_cmd->add_option("--n-trees", pl.n_trees);
  pipe_cmd->add_option("--split-unit", pl.split_unit)
      ->check(CLI::IsMember({"SEGMENT", "TRIAL", "SUBJECT"}));
  pipe_cmd->add_option("--out-dir", pl.out_dir);

  // replay ------------------------------------------------------------
  auto* replay_cmd = app.add_subcommand("replay", "rerun from a manifest");
  std::string replay_path;
  replay_cmd->add_option("manifest", replay_path)->required();

  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  try {
    if (synth_cmd->parsed()) {
      json p{{"subjects", sy.subjects},      {"trials", sy.trials},
             {"duration_s", sy.duration},    {"seed", sy.seed},
             {"noise_enabled", sy.noise},    {"noise_snr_db", sy.noise_snr_db},
             {"label_noise_sd", sy.label_noise_sd},
             {"out_dir", sy.out_dir},        {"format", sy.format}};
      return cmd_synth(p);
    }
    if (demod_cmd->parsed()) {
      json p{{"input", dm.input},   {"out_prefix", dm.out_prefix},
             {"format", dm.format}, {"n_block", dm.n_block},
             {"excitation_freq_hz", dm.f_exc}, {"kinds", dm.kinds}};
      return cmd_demod(p);
    }
    if (prep_cmd->parsed()) {
      json p{{"biz", pr.biz},           {"ecg", pr.ecg},
             {"out_prefix", pr.out_prefix}, {"fir_order", pr.fir_order},
             {"fir_low_hz", pr.fir_low},    {"fir_high_hz", pr.fir_high},
             {"sg_order", pr.sg_order},     {"sg_window", pr.sg_window},
             {"detrend", !pr.smooth}};
      return cmd_preprocess(p);
    }
    if (ext_cmd->parsed()) {
      json p{{"biz", ex.biz},       {"ecg", ex.ecg},
             {"list", ex.list},     {"sbp", ex.sbp},
             {"dbp", ex.dbp},       {"group", ex.group},
             {"window_s", ex.window_s}, {"overlap", ex.overlap},
             {"output", ex.output}, {"cycles_out", ex.cycles_out}};
      return cmd_extract(p);
    }
    if (sel_cmd->parsed()) {
      json p{{"table", se.table},   {"method", se.method},
             {"target", se.target}, {"k", se.k},
             {"seed", se.seed},     {"n_trees", se.n_trees},
             {"output", se.output}, {"ranking_out", se.ranking_out},
             {"sweep_grid", se.sweep_grid}, {"sweep_out", se.sweep_out},
             {"folds", se.folds}};
      return cmd_select(p);
    }
    if (train_cmd->parsed()) {
      json p{{"table", tr.table},   {"model", regress::model_kind_name(
                                         regress::model_kind_from_name(
                                             [&] {
                                               std::string m = tr.model;
                                               for (auto& c : m) c = toupper(c);
                                               return m;
                                             }()))},
             {"target", tr.target}, {"n_trees", tr.n_trees},
             {"seed", tr.seed},     {"svr_c", tr.svr_c},
             {"svr_epsilon", tr.svr_epsilon}, {"output", tr.output}};
      return cmd_train(p);
    }
    if (eval_cmd->parsed()) {
      std::string m = ev.model;
      for (auto& c : m) c = toupper(c);
      json p{{"table", ev.table},        {"model", m},
             {"target", ev.target},      {"method", ev.method},
             {"k", ev.k},                {"folds", ev.folds},
             {"split_unit", ev.split_unit}, {"cv_seed", ev.cv_seed},
             {"model_seed", ev.model_seed}, {"select_seed", ev.select_seed},
             {"n_trees", ev.n_trees},    {"svr_c", ev.svr_c},
             {"svr_epsilon", ev.svr_epsilon}, {"out_prefix", ev.out_prefix}};
      return cmd_evaluate(p);
    }
    if (rep_cmd->parsed()) return cmd_report(json{{"input", rep_in}});
    if (sum_cmd->parsed()) {
      return cmd_summary(json{{"table", su.table}, {"output", su.output}});
    }
    if (pipe_cmd->parsed()) {
      pipeline::PipelineConfig config;
      config.corpus.n_subjects = pl.subjects;
      config.corpus.trials_per_subject = pl.trials;
      config.corpus.duration_s = pl.duration;
      config.corpus.seed = pl.seed;
      config.corpus.base.noise_enabled = pl.noise;
      config.corpus.base.noise_snr_db = pl.noise_snr_db;
      config.corpus.base.sbp_law.noise_sd_mmhg = pl.label_noise_sd;
      config.corpus.base.dbp_law.noise_sd_mmhg = pl.label_noise_sd;
      config.data_dir = pl.data_dir;
      config.raw_format = pl.format;
      config.select_method = featsel::method_name(
          featsel::method_from_name(pl.method));
      config.select_k = pl.k;
      config.select_seed = pl.seed;
      std::string m = pl.model;
      for (auto& c : m) c = toupper(c);
      config.model = regress::model_kind_from_name(m);
      config.forest.n_trees = pl.n_trees;
      config.forest.seed = pl.seed;
      config.cv_folds = pl.folds;
      config.cv_seed = pl.seed;
      config.split_unit = eval::split_unit_from_name(pl.split_unit);
      config.threads = threads;
      json p{{"config", pipeline_config_to_json(config)},
             {"out_dir", pl.out_dir}};
      return cmd_pipeline(p);
    }
    if (replay_cmd->parsed()) {
      std::ifstream in(replay_path);
      if (!in) {
        throw Error(ErrorCode::IoFailure, "cli", "cannot read " + replay_path);
      }
      json manifest;
      in >> manifest;
      if (manifest.value("format", "") != "biozbp-manifest-v1") {
        throw Error(ErrorCode::IoFailure, "cli", "not a manifest file");
      }
      return dispatch(manifest.at("command").get<std::string>(),
                      manifest.at("params"));
    }
  } catch (const Error& e) {
    json payload{{"stage", e.stage()},
                 {"code", error_code_name(e.code())},
                 {"message", e.what()}};
    std::cerr << "error: " << payload.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
