#include "biozbp/pipeline.hpp"

#include "biozbp/demod.hpp"
#include "biozbp/features.hpp"
#include "biozbp/io.hpp"
#include "biozbp/threading.hpp"

#include <cstdio>
#include <filesystem>
#include <random>

namespace biozbp::pipeline {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<synth::SynthConfig> corpus_configs(const CorpusConfig& config) {
  std::vector<synth::SynthConfig> out;
  out.reserve(config.n_subjects * config.trials_per_subject);
  char buf[32];
  for (int s = 0; s < config.n_subjects; ++s) {
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(1000 + s)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double base_ptt =
        config.ptt_min_s + (config.ptt_max_s - config.ptt_min_s) * u01(rng);
    const double base_hr =
        config.hr_min_bpm + (config.hr_max_bpm - config.hr_min_bpm) * u01(rng);
    for (int t = 0; t < config.trials_per_subject; ++t) {
      synth::SynthConfig cfg = config.base;
      cfg.ptt_s = base_ptt + config.ptt_trial_jitter_s * (2.0 * u01(rng) - 1.0);
      cfg.heart_rate_bpm =
          base_hr + config.hr_trial_jitter_bpm * (2.0 * u01(rng) - 1.0);
      cfg.seed = splitmix64(config.seed ^ splitmix64(s * 1000ULL + t));
      std::snprintf(buf, sizeof(buf), "s%02d", s);
      cfg.subject_id = buf;
      std::snprintf(buf, sizeof(buf), "t%02d", t);
      cfg.trial_id = buf;
      out.push_back(std::move(cfg));
    }
  }
  return out;
}

std::vector<LabeledSegment> process_trial(const RawRecording& rec,
                                          double sbp_mmhg, double dbp_mmhg,
                                          const PipelineConfig& config) {
  auto dm = demod::demodulate(rec, config.n_block);

  preprocess::FirSpec fir = config.fir;
  fir.sample_rate_hz = dm.biz_abs.sample_rate_hz;
  const Vector taps = preprocess::design_fir(fir);

  ProcessedSeries biz = preprocess::apply_fir(dm.biz_abs, taps);
  ProcessedSeries ecg = preprocess::apply_fir(dm.ecg_500, taps);
  if (config.detrend) {
    biz = preprocess::apply_sg(biz, config.sg, preprocess::SgMode::Detrend);
    ecg = preprocess::apply_sg(ecg, config.sg, preprocess::SgMode::Detrend);
  }
  const std::string group = rec.subject_id + "/" + rec.trial_id;
  return preprocess::segment(biz, ecg, sbp_mmhg, dbp_mmhg, config.window,
                             group);
}

FeatureTable extract_table(const std::vector<LabeledSegment>& segments) {
  std::vector<features::ExtractReport> reports(segments.size());
  parallel_for(segments.size(), [&](std::size_t i) {
    reports[i] = features::extract_all(segments[i]);
  });
  FeatureTable table;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    table.append(reports[i].vector, segments[i].sbp_mmhg,
                 segments[i].dbp_mmhg, segments[i].group_id);
  }
  // Resolved values of every parameter the feature stage leaves open.
  table.provenance =
      "extract(entropy_m=2,entropy_r_frac=0.2,kurtosis=non_excess,"
      "cycle_agg=mean,heights=detrended)";
  return table;
}

FeatureTable build_table(const PipelineConfig& config) {
  if (config.threads > 0) set_thread_count(config.threads);

  struct TrialInput {
    RawRecording rec;
    double sbp, dbp;
  };

  FeatureTable table;
  if (!config.data_dir.empty()) {
    // Existing raw trials: <dir>/<subject>_<trial>.{csv,bin} + labels.csv.
    const auto labels =
        io::load_labels(config.data_dir + "/labels.csv");
    const io::Format fmt = io::format_from_name(config.raw_format);
    std::vector<std::vector<LabeledSegment>> segs(labels.size());
    parallel_for(labels.size(), [&](std::size_t i) {
      const auto& l = labels[i];
      const std::string stem =
          config.data_dir + "/" + l.subject_id + "_" + l.trial_id;
      const std::string path =
          stem + (fmt == io::Format::Csv ? ".csv" : ".bin");
      RawRecording rec = io::load_raw(path, fmt);
      rec.subject_id = l.subject_id;
      rec.trial_id = l.trial_id;
      segs[i] = process_trial(rec, l.sbp_mmhg, l.dbp_mmhg, config);
    });
    std::vector<LabeledSegment> all;
    for (auto& s : segs) {
      for (auto& seg : s) all.push_back(std::move(seg));
    }
    return extract_table(all);
  }

  const auto configs = corpus_configs(config.corpus);
  std::vector<std::vector<LabeledSegment>> segs(configs.size());
  // Trials run in parallel; raw samples for at most one trial per worker are
  // alive at a time.
  parallel_for(configs.size(), [&](std::size_t i) {
    auto [rec, truth] = synth::generate(configs[i], config.corpus.duration_s);
    segs[i] = process_trial(rec, truth.true_sbp_mmhg.front(),
                            truth.true_dbp_mmhg.front(), config);
  });
  std::vector<LabeledSegment> all;
  for (auto& s : segs) {
    for (auto& seg : s) all.push_back(std::move(seg));
  }
  return extract_table(all);
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  PipelineResult result;
  result.table = build_table(config);

  const featsel::Method method = featsel::method_from_name(config.select_method);
  if (config.select_k > 0) {
    switch (method) {
      case featsel::Method::Pcc:
        result.ranking = featsel::rank_pcc(result.table, Target::Sbp);
        break;
      case featsel::Method::RfImpurity:
        result.ranking = featsel::rank_impurity(result.table, Target::Sbp,
                                                config.forest,
                                                config.select_seed);
        break;
      case featsel::Method::Combined: {
        auto pcc = featsel::rank_pcc(result.table, Target::Sbp);
        auto imp = featsel::rank_impurity(result.table, Target::Sbp,
                                          config.forest, config.select_seed);
        result.ranking = featsel::combined_ranking(pcc, imp);
        break;
      }
    }
    result.selected =
        featsel::select_top_k(result.table, result.ranking, config.select_k);
  } else {
    result.selected = result.table;
  }

  eval::ModelConfig model;
  model.kind = config.model;
  model.forest = config.forest;
  model.svr = config.svr;
  eval::CvConfig cv;
  cv.n_folds = config.cv_folds;
  cv.shuffle_seed = config.cv_seed;
  cv.split_unit = config.split_unit;
  cv.target = Target::Sbp;
  result.sbp_report = eval::cross_validate(result.selected, model, cv);
  cv.target = Target::Dbp;
  result.dbp_report = eval::cross_validate(result.selected, model, cv);
  return result;
}

}  // namespace biozbp::pipeline
