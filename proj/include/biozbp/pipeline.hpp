#pragma once

#include "biozbp/eval.hpp"
#include "biozbp/featsel.hpp"
#include "biozbp/preprocess.hpp"
#include "biozbp/synth.hpp"
#include "biozbp/types.hpp"

namespace biozbp::pipeline {

// Seeded multi-subject corpus: per-subject base PTT/HR drawn from the
// configured ranges, per-trial jitter on top, one label pair per trial from
// the configured pressure laws.
struct CorpusConfig {
  int n_subjects = 13;
  int trials_per_subject = 10;
  double duration_s = 30.0;
  std::uint64_t seed = 1;
  synth::SynthConfig base;
  double ptt_min_s = 0.15, ptt_max_s = 0.30;
  double ptt_trial_jitter_s = 0.015;
  double hr_min_bpm = 55.0, hr_max_bpm = 90.0;
  double hr_trial_jitter_bpm = 4.0;
};

std::vector<synth::SynthConfig> corpus_configs(const CorpusConfig& config);

// Stage parameters for one full run. Serialized verbatim into the manifest so
// a run is reproducible from it alone.
struct PipelineConfig {
  CorpusConfig corpus;        // used when data_dir is empty
  std::string data_dir;       // existing raw trials + labels.csv
  std::string raw_format = "csv";
  int n_block = 200;
  preprocess::FirSpec fir;
  preprocess::SgSpec sg;
  preprocess::WindowSpec window;
  bool detrend = true;
  std::string select_method = "RF_IMPURITY";
  int select_k = 10;  // 0 disables selection
  std::uint64_t select_seed = 1;
  regress::ModelKind model = regress::ModelKind::Rf;
  regress::ForestConfig forest{500, 1, -1, 0, true, 1};
  regress::SvrConfig svr;
  int cv_folds = 10;
  std::uint64_t cv_seed = 1;
  eval::SplitUnit split_unit = eval::SplitUnit::Segment;
  int threads = 0;
};

// Demod + filtering + segmentation + feature extraction for one trial.
std::vector<LabeledSegment> process_trial(const RawRecording& rec,
                                          double sbp_mmhg, double dbp_mmhg,
                                          const PipelineConfig& config);

FeatureTable extract_table(const std::vector<LabeledSegment>& segments);

// Synthesizes (or loads) every trial, extracts the canonical feature table.
FeatureTable build_table(const PipelineConfig& config);

struct PipelineResult {
  FeatureTable table;          // canonical 42-column table
  FeatureTable selected;       // after top-k projection (== table when k = 0)
  featsel::RankedFeatureSet ranking;
  eval::EvalReport sbp_report;
  eval::EvalReport dbp_report;
};

PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace biozbp::pipeline
