#include "biozbp/io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary format assumes a little-endian host");

namespace biozbp::io {

namespace {

using nlohmann::json;

constexpr char kBinMagic[8] = {'B', 'Z', 'B', 'I', 'N', '0', '0', '1'};

[[noreturn]] void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, "dataset-io", msg);
}

std::map<std::string, std::string> parse_header_line(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(line.substr(1));  // past '#'
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) {
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return kv;
}

double require_number(const std::map<std::string, std::string>& kv,
                      const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::MissingHeaderField, "missing " + key);
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || !(v > 0.0)) {
    fail(ErrorCode::MissingHeaderField, key + " must be a positive number");
  }
  return v;
}

// Splits a CSV data line in place; returns field count, fields into `out`.
int split_fields(char* line, char** out, int max_fields) {
  int n = 0;
  char* p = line;
  while (n < max_fields) {
    out[n++] = p;
    char* comma = std::strchr(p, ',');
    if (!comma) break;
    *comma = '\0';
    p = comma + 1;
  }
  return n;
}

double parse_sample(const char* field, Eigen::Index row) {
  char* end = nullptr;
  const double v = std::strtod(field, &end);
  if (end == field) {
    fail(ErrorCode::NonFiniteSample,
         "unparseable sample at row " + std::to_string(row));
  }
  if (!std::isfinite(v)) {
    fail(ErrorCode::NonFiniteSample,
         "non-finite sample at row " + std::to_string(row));
  }
  return v;
}

void write_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

double read_f64(std::ifstream& in) {
  double v = 0.0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1ULL << 20)) fail(ErrorCode::IoFailure, "corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

json vec_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> vec_from_json(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

}  // namespace

Format format_from_name(const std::string& name) {
  if (name == "csv" || name == "CSV") return Format::Csv;
  if (name == "bin" || name == "BIN") return Format::Bin;
  fail(ErrorCode::BadUsage, "unknown format " + name);
}

RawRecording load_raw_mapped(const std::string& path, const RawColumnMap& map) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);

  RawRecording rec;
  rec.sample_rate_hz = map.sample_rate_hz;
  rec.excitation_freq_hz = map.excitation_freq_hz;
  rec.r0_ohm = map.r0_ohm;

  std::string line;
  std::vector<double> vs, vr, ecg;
  const int need = 1 + std::max({map.vs_col, map.vr_col, map.ecg_col});
  std::vector<char*> fields(need + 1);
  Eigen::Index row = 0;
  bool saw_data_header = false;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto kv = parse_header_line(line);
      if (kv.count("sample_rate_hz")) {
        rec.sample_rate_hz = require_number(kv, "sample_rate_hz");
      }
      if (kv.count("excitation_freq_hz")) {
        rec.excitation_freq_hz = require_number(kv, "excitation_freq_hz");
      }
      if (kv.count("r0_ohm")) rec.r0_ohm = require_number(kv, "r0_ohm");
      if (kv.count("subject")) rec.subject_id = kv["subject"];
      if (kv.count("trial")) rec.trial_id = kv["trial"];
      continue;
    }
    if (!saw_data_header &&
        line.find_first_not_of("0123456789+-.eE, \r") != std::string::npos) {
      saw_data_header = true;  // column-name row
      continue;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const int got = split_fields(line.data(), fields.data(), need + 1);
    if (got < need) {
      fail(ErrorCode::LengthMismatch,
           "row " + std::to_string(row) + " has " + std::to_string(got) +
               " fields, need " + std::to_string(need));
    }
    vs.push_back(parse_sample(fields[map.vs_col], row));
    vr.push_back(parse_sample(fields[map.vr_col], row));
    ecg.push_back(parse_sample(fields[map.ecg_col], row));
    ++row;
  }
  if (rec.sample_rate_hz <= 0.0 || rec.excitation_freq_hz <= 0.0 ||
      rec.r0_ohm <= 0.0) {
    fail(ErrorCode::MissingHeaderField,
         "sample_rate_hz, excitation_freq_hz and r0_ohm must come from the "
         "file header or the column map");
  }
  if (row < 1) fail(ErrorCode::LengthMismatch, "no samples in " + path);

  rec.vs_samples = Eigen::Map<Vector>(vs.data(), row);
  rec.vr_samples = Eigen::Map<Vector>(vr.data(), row);
  rec.ecg_samples = Eigen::Map<Vector>(ecg.data(), row);
  rec.duration_s = static_cast<double>(row) / rec.sample_rate_hz;
  rec.validate();
  return rec;
}

RawRecording load_raw(const std::string& path, Format format) {
  if (format == Format::Csv) {
    return load_raw_mapped(path, RawColumnMap{});
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kBinMagic, 8) != 0) {
    fail(ErrorCode::IoFailure, "bad magic in " + path);
  }
  RawRecording rec;
  const std::uint64_t n = read_u64(in);
  rec.sample_rate_hz = read_f64(in);
  rec.excitation_freq_hz = read_f64(in);
  rec.r0_ohm = read_f64(in);
  rec.subject_id = read_string(in);
  rec.trial_id = read_string(in);
  rec.vs_samples.resize(n);
  rec.vr_samples.resize(n);
  rec.ecg_samples.resize(n);
  in.read(reinterpret_cast<char*>(rec.vs_samples.data()), n * sizeof(double));
  in.read(reinterpret_cast<char*>(rec.vr_samples.data()), n * sizeof(double));
  in.read(reinterpret_cast<char*>(rec.ecg_samples.data()), n * sizeof(double));
  if (!in) fail(ErrorCode::LengthMismatch, "truncated binary recording");
  rec.duration_s = static_cast<double>(n) / rec.sample_rate_hz;
  rec.validate();
  return rec;
}

void save_raw(const RawRecording& rec, const std::string& path, Format format) {
  rec.validate();
  if (format == Format::Csv) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "# sample_rate_hz=%.17g excitation_freq_hz=%.17g "
                  "r0_ohm=%.17g subject=%s trial=%s\n",
                  rec.sample_rate_hz, rec.excitation_freq_hz, rec.r0_ohm,
                  rec.subject_id.c_str(), rec.trial_id.c_str());
    out << buf << "vs,vr,ecg\n";
    for (Eigen::Index i = 0; i < rec.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", rec.vs_samples(i),
                    rec.vr_samples(i), rec.ecg_samples(i));
      out << buf;
    }
    if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out.write(kBinMagic, 8);
  write_u64(out, static_cast<std::uint64_t>(rec.size()));
  write_f64(out, rec.sample_rate_hz);
  write_f64(out, rec.excitation_freq_hz);
  write_f64(out, rec.r0_ohm);
  write_string(out, rec.subject_id);
  write_string(out, rec.trial_id);
  out.write(reinterpret_cast<const char*>(rec.vs_samples.data()),
            rec.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(rec.vr_samples.data()),
            rec.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(rec.ecg_samples.data()),
            rec.size() * sizeof(double));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

void save_series(const ProcessedSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "# kind=%s sample_rate_hz=%.17g\n",
                series_kind_name(series.kind), series.sample_rate_hz);
  out << buf;
  for (const auto& step : series.processing_log) out << "# log: " << step << "\n";
  out << "value\n";
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", series.values(i));
    out << buf;
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

ProcessedSeries load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
  ProcessedSeries s;
  s.sample_rate_hz = 0.0;
  std::string line;
  std::vector<double> values;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# log: ", 0) == 0) {
      s.processing_log.push_back(line.substr(7));
      continue;
    }
    if (line[0] == '#') {
      auto kv = parse_header_line(line);
      if (kv.count("kind")) s.kind = series_kind_from_name(kv["kind"]);
      if (kv.count("sample_rate_hz")) {
        s.sample_rate_hz = require_number(kv, "sample_rate_hz");
      }
      continue;
    }
    if (line == "value" || line == "value\r") continue;
    values.push_back(parse_sample(line.c_str(), row));
    ++row;
  }
  if (s.sample_rate_hz <= 0.0) {
    fail(ErrorCode::MissingHeaderField, "series file lacks sample_rate_hz");
  }
  s.values = Eigen::Map<Vector>(values.data(), row);
  return s;
}

void save_feature_table(const FeatureTable& table, const std::string& path) {
  table.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out << "# biozbp-features-v1";
  if (!table.provenance.empty()) out << " provenance=" << table.provenance;
  out << "\n";
  out << "group,valid,reason";
  for (const auto& name : table.feature_names) out << "," << name;
  out << ",sbp_mmhg,dbp_mmhg\n";
  char buf[64];
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    out << table.group_id[i] << "," << int(table.valid[i]) << ","
        << table.invalid_reason[i];
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.17g", table.features(i, j));
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", table.sbp(i),
                  table.dbp(i));
    out << buf;
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

FeatureTable load_feature_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
  FeatureTable table;
  std::string line;
  bool have_columns = false;
  Eigen::Index p = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line[0] == '#') {
      const auto pos = line.find("provenance=");
      if (pos != std::string::npos) table.provenance = line.substr(pos + 11);
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (line.back() == ',') fields.push_back("");
    if (!have_columns) {
      if (fields.size() < 5 || fields[0] != "group") {
        fail(ErrorCode::MissingHeaderField, "feature CSV lacks column header");
      }
      p = static_cast<Eigen::Index>(fields.size()) - 5;
      for (Eigen::Index j = 0; j < p; ++j) {
        table.feature_names.push_back(fields[3 + j]);
      }
      have_columns = true;
      continue;
    }
    if (static_cast<Eigen::Index>(fields.size()) != p + 5) {
      fail(ErrorCode::LengthMismatch,
           "row " + std::to_string(rows.size()) + " has wrong field count");
    }
    table.group_id.push_back(fields[0]);
    table.valid.push_back(fields[1] == "1" ? 1 : 0);
    table.invalid_reason.push_back(fields[2]);
    std::vector<double> vals(p + 2);
    for (Eigen::Index j = 0; j < p + 2; ++j) {
      char* end = nullptr;
      vals[j] = std::strtod(fields[3 + j].c_str(), &end);
      if (end == fields[3 + j].c_str() && table.valid.back()) {
        fail(ErrorCode::NonFiniteSample,
             "unparseable value in row " + std::to_string(rows.size()));
      }
    }
    rows.push_back(std::move(vals));
  }
  if (!have_columns) {
    fail(ErrorCode::MissingHeaderField, "feature CSV lacks column header");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  table.features.resize(n, p);
  table.sbp.resize(n);
  table.dbp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) table.features(i, j) = rows[i][j];
    table.sbp(i) = rows[i][p];
    table.dbp(i) = rows[i][p + 1];
  }
  table.validate();
  return table;
}

void save_ground_truth(const synth::GroundTruth& truth,
                       const std::string& path) {
  json j;
  j["format"] = "biozbp-truth-v1";
  j["impedance_rate_hz"] = truth.impedance_rate_hz;
  j["r_peak_times_s"] = vec_to_json(truth.r_peak_times_s);
  j["biz_min_times_s"] = vec_to_json(truth.biz_min_times_s);
  j["biz_max_times_s"] = vec_to_json(truth.biz_max_times_s);
  j["biz_md_times_s"] = vec_to_json(truth.biz_md_times_s);
  j["true_sbp_mmhg"] = vec_to_json(truth.true_sbp_mmhg);
  j["true_dbp_mmhg"] = vec_to_json(truth.true_dbp_mmhg);
  json z = json::array();
  for (Eigen::Index i = 0; i < truth.clean_impedance.size(); ++i) {
    z.push_back(truth.clean_impedance(i));
  }
  j["clean_impedance_ohm"] = std::move(z);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out << j.dump() << "\n";
}

synth::GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "biozbp-truth-v1") {
    fail(ErrorCode::IoFailure, "unrecognized ground-truth file");
  }
  synth::GroundTruth t;
  t.impedance_rate_hz = j["impedance_rate_hz"].get<double>();
  t.r_peak_times_s = vec_from_json(j["r_peak_times_s"]);
  t.biz_min_times_s = vec_from_json(j["biz_min_times_s"]);
  t.biz_max_times_s = vec_from_json(j["biz_max_times_s"]);
  t.biz_md_times_s = vec_from_json(j["biz_md_times_s"]);
  t.true_sbp_mmhg = vec_from_json(j["true_sbp_mmhg"]);
  t.true_dbp_mmhg = vec_from_json(j["true_dbp_mmhg"]);
  const auto z = vec_from_json(j["clean_impedance_ohm"]);
  t.clean_impedance = Eigen::Map<const Vector>(z.data(), z.size());
  return t;
}

void save_labels(const std::vector<TrialLabel>& labels,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out << "subject,trial,sbp_mmhg,dbp_mmhg\n";
  char buf[160];
  for (const auto& l : labels) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", l.subject_id.c_str(),
                  l.trial_id.c_str(), l.sbp_mmhg, l.dbp_mmhg);
    out << buf;
  }
}

std::vector<TrialLabel> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
  std::vector<TrialLabel> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line.rfind("subject", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    std::stringstream ss(line);
    TrialLabel l;
    std::string tok;
    if (!std::getline(ss, l.subject_id, ',') ||
        !std::getline(ss, l.trial_id, ',') || !std::getline(ss, tok, ',')) {
      fail(ErrorCode::LengthMismatch, "bad labels row: " + line);
    }
    l.sbp_mmhg = std::strtod(tok.c_str(), nullptr);
    if (!std::getline(ss, tok, ',')) {
      fail(ErrorCode::LengthMismatch, "bad labels row: " + line);
    }
    l.dbp_mmhg = std::strtod(tok.c_str(), nullptr);
    labels.push_back(std::move(l));
  }
  return labels;
}

SummaryStats dataset_summary(const FeatureTable& table) {
  if (table.rows() < 1) {
    fail(ErrorCode::EmptyTable, "summary of an empty table");
  }
  SummaryStats s;
  s.n_rows = table.rows();
  s.n_valid = table.valid_count();
  const Eigen::Index n = table.rows();
  s.sbp_mean = table.sbp.mean();
  s.dbp_mean = table.dbp.mean();
  if (n > 1) {
    s.sbp_sd = std::sqrt((table.sbp.array() - s.sbp_mean).square().sum() /
                         static_cast<double>(n - 1));
    s.dbp_sd = std::sqrt((table.dbp.array() - s.dbp_mean).square().sum() /
                         static_cast<double>(n - 1));
  }
  for (const auto& g : table.group_id) {
    const auto slash = g.find('/');
    s.per_subject[slash == std::string::npos ? g : g.substr(0, slash)]++;
  }
  const double lo = std::min(table.sbp.minCoeff(), table.dbp.minCoeff());
  const double hi = std::max(table.sbp.maxCoeff(), table.dbp.maxCoeff());
  s.bin_lo = std::floor(lo / s.bin_width) * s.bin_width;
  const int bins = std::max(
      1, static_cast<int>(std::ceil((hi - s.bin_lo) / s.bin_width)) +
             ((hi == s.bin_lo) ? 1 : 0));
  s.sbp_hist.assign(bins, 0);
  s.dbp_hist.assign(bins, 0);
  auto bin_of = [&](double v) {
    int b = static_cast<int>(std::floor((v - s.bin_lo) / s.bin_width));
    return std::clamp(b, 0, bins - 1);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    s.sbp_hist[bin_of(table.sbp(i))]++;
    s.dbp_hist[bin_of(table.dbp(i))]++;
  }
  return s;
}

void save_summary(const SummaryStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "# rows=%lld valid=%lld sbp=%.2f+/-%.2f dbp=%.2f+/-%.2f\n",
                static_cast<long long>(stats.n_rows),
                static_cast<long long>(stats.n_valid), stats.sbp_mean,
                stats.sbp_sd, stats.dbp_mean, stats.dbp_sd);
  out << buf;
  out << "bin_lo_mmhg,bin_hi_mmhg,sbp_count,dbp_count\n";
  for (std::size_t b = 0; b < stats.sbp_hist.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld,%lld\n",
                  stats.bin_lo + b * stats.bin_width,
                  stats.bin_lo + (b + 1) * stats.bin_width,
                  static_cast<long long>(stats.sbp_hist[b]),
                  static_cast<long long>(stats.dbp_hist[b]));
    out << buf;
  }
  out << "subject,rows\n";
  for (const auto& [subj, count] : stats.per_subject) {
    out << subj << "," << count << "\n";
  }
}

}  // namespace biozbp::io
