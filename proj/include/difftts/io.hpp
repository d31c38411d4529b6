// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "difftts/matrix.hpp"
#include "difftts/scorenet.hpp"
#include "difftts/tts.hpp"

namespace difftts {

inline constexpr const char* kVersion = "0.1.0";

// --- CSV --------------------------------------------------------------------

inline std::string csv_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                             const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out << (c ? "," : "") << csv_double(m(r, c));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Reads a numeric CSV with a mandatory header row; returns the values.
inline Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path.string());
  if (header) {
    header->clear();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header->push_back(cell);
  }
  std::vector<Vec> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Vec row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  return matrix_from_rows(rows);
}

// --- checkpoints -------------------------------------------------------------
//
// Flat binary parameter file with a text header. The header names each
// section with its arch metadata and parameter count; the body is the
// concatenated float64 little-endian parameters in section order.

namespace detail {

inline void write_doubles(std::ofstream& out, const Vec& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::ifstream& in, Vec& v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<int> split_ints(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stoi(cell));
  return v;
}

}  // namespace detail

namespace detail {

inline void write_score_section_header(std::ofstream& out, const ToyScoreNet& net) {
  out << "section score count=" << net.params.size() << " dim=" << net.arch.dim
      << " hidden=" << join_ints(net.arch.hidden) << " time_dim=" << net.arch.time_dim << "\n";
}

}  // namespace detail

// Standalone score-network parameter file; same container as a full
// checkpoint, with a single section.
inline void save_score_net(const std::filesystem::path& path, const ToyScoreNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "difftts-checkpoint v1\n";
  detail::write_score_section_header(out, net);
  out << "end\n";
  detail::write_doubles(out, net.params);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void save_checkpoint(const std::filesystem::path& path, const TtsModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "difftts-checkpoint v1\n";
  out << "beta0 " << csv_double(model.spec.schedule.beta0) << "\n";
  out << "beta1 " << csv_double(model.spec.schedule.beta1) << "\n";
  out << "horizon " << csv_double(model.spec.schedule.horizon) << "\n";
  out << "section encoder count=" << model.encoder.params.size() << " vocab=" << model.encoder.vocab
      << " dim=" << model.encoder.dim << "\n";
  out << "section duration count=" << model.dur.params.size() << " dim=" << model.dur.dim
      << " hidden=" << model.dur.hidden << "\n";
  detail::write_score_section_header(out, model.score_net);
  out << "end\n";
  detail::write_doubles(out, model.encoder.params);
  detail::write_doubles(out, model.dur.params);
  detail::write_doubles(out, model.score_net.params);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace detail {

struct CheckpointSection {
  std::string name;
  std::size_t count = 0;
  std::map<std::string, std::string> kv;
};

struct CheckpointHeader {
  NoiseSchedule schedule;
  std::vector<CheckpointSection> sections;
};

inline CheckpointHeader parse_checkpoint_header(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != "difftts-checkpoint v1")
    throw std::runtime_error("checkpoint: bad magic in " + path);
  CheckpointHeader hdr;
  while (std::getline(in, line) && line != "end") {
    std::stringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "beta0")
      ss >> hdr.schedule.beta0;
    else if (word == "beta1")
      ss >> hdr.schedule.beta1;
    else if (word == "horizon")
      ss >> hdr.schedule.horizon;
    else if (word == "section") {
      CheckpointSection sec;
      ss >> sec.name;
      std::string field;
      while (ss >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed section field");
        sec.kv[field.substr(0, eq)] = field.substr(eq + 1);
      }
      sec.count = std::stoull(sec.kv.at("count"));
      hdr.sections.push_back(std::move(sec));
    } else {
      throw std::runtime_error("checkpoint: unknown header line: " + line);
    }
  }
  if (line != "end") throw std::runtime_error("checkpoint: missing end marker");
  return hdr;
}

inline ToyScoreNet read_score_section(std::ifstream& in, const CheckpointSection& sec) {
  ToyScoreNet net;
  net.arch.dim = std::stoi(sec.kv.at("dim"));
  net.arch.hidden = split_ints(sec.kv.at("hidden"));
  net.arch.time_dim = std::stoi(sec.kv.at("time_dim"));
  if (sec.count != static_cast<std::size_t>(ToyScoreNet::param_count(net.arch)))
    throw std::runtime_error("checkpoint: score parameter count mismatch");
  net.params.resize(sec.count);
  read_doubles(in, net.params);
  return net;
}

}  // namespace detail

inline ToyScoreNet load_score_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  const detail::CheckpointHeader hdr = detail::parse_checkpoint_header(in, path.string());
  for (const auto& sec : hdr.sections)
    if (sec.name == "score") return detail::read_score_section(in, sec);
  throw std::runtime_error("checkpoint: no score section in " + path.string());
}

inline TtsModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  const detail::CheckpointHeader hdr = detail::parse_checkpoint_header(in, path.string());

  TtsModel model;
  for (const detail::CheckpointSection& sec : hdr.sections) {
    if (sec.name == "encoder") {
      model.encoder.vocab = std::stoi(sec.kv.at("vocab"));
      model.encoder.dim = std::stoi(sec.kv.at("dim"));
      if (sec.count != static_cast<std::size_t>(TokenEncoder::param_count(model.encoder.vocab, model.encoder.dim)))
        throw std::runtime_error("checkpoint: encoder parameter count mismatch");
      model.encoder.params.resize(sec.count);
      detail::read_doubles(in, model.encoder.params);
    } else if (sec.name == "duration") {
      model.dur.dim = std::stoi(sec.kv.at("dim"));
      model.dur.hidden = std::stoi(sec.kv.at("hidden"));
      if (sec.count != static_cast<std::size_t>(DurationPredictor::param_count(model.dur.dim, model.dur.hidden)))
        throw std::runtime_error("checkpoint: duration parameter count mismatch");
      model.dur.params.resize(sec.count);
      detail::read_doubles(in, model.dur.params);
    } else if (sec.name == "score") {
      model.score_net = detail::read_score_section(in, sec);
    } else {
      throw std::runtime_error("checkpoint: unknown section " + sec.name);
    }
  }
  model.spec = DiffusionSpec::identity(model.score_net.arch.dim, hdr.schedule);
  return model;
}

// --- corpus ------------------------------------------------------------------
//
// A corpus directory holds manifest.json (recipe, patterns, ground-truth
// durations, token sequences, seed) plus one feature CSV per item.

inline void save_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "difftts-corpus v1";
  manifest["vocab"] = corpus.recipe.vocab;
  manifest["dim"] = corpus.recipe.dim;
  manifest["noise"] = corpus.recipe.noise;
  manifest["min_tokens"] = corpus.recipe.min_tokens;
  manifest["max_tokens"] = corpus.recipe.max_tokens;
  manifest["min_duration"] = corpus.recipe.min_duration;
  manifest["max_duration"] = corpus.recipe.max_duration;
  manifest["pattern_seed"] = corpus.recipe.pattern_seed;
  manifest["seed"] = corpus.seed;
  manifest["symbol_durations"] = corpus.symbol_durations;
  std::vector<std::vector<double>> patterns(corpus.patterns.rows);
  for (int v = 0; v < corpus.patterns.rows; ++v) {
    auto row = corpus.patterns.row(v);
    patterns[v].assign(row.begin(), row.end());
  }
  manifest["patterns"] = patterns;

  std::vector<std::string> header(static_cast<std::size_t>(corpus.recipe.dim));
  for (int c = 0; c < corpus.recipe.dim; ++c) header[c] = "x_" + std::to_string(c + 1);

  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "item_%04zu.csv", i);
    write_matrix_csv(dir / name, header, corpus.items[i].features);
    items.push_back({{"tokens", corpus.items[i].tokens}, {"file", name}});
  }
  manifest["items"] = items;

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot open for writing: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

inline SyntheticCorpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open corpus manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "difftts-corpus v1")
    throw std::runtime_error("corpus: unknown manifest format");

  SyntheticCorpus corpus;
  corpus.recipe.vocab = manifest.at("vocab");
  corpus.recipe.dim = manifest.at("dim");
  corpus.recipe.noise = manifest.at("noise");
  corpus.recipe.min_tokens = manifest.at("min_tokens");
  corpus.recipe.max_tokens = manifest.at("max_tokens");
  corpus.recipe.min_duration = manifest.at("min_duration");
  corpus.recipe.max_duration = manifest.at("max_duration");
  corpus.recipe.pattern_seed = manifest.at("pattern_seed");
  corpus.seed = manifest.at("seed");
  corpus.symbol_durations = manifest.at("symbol_durations").get<std::vector<int>>();
  const auto patterns = manifest.at("patterns").get<std::vector<std::vector<double>>>();
  corpus.patterns = Matrix(corpus.recipe.vocab, corpus.recipe.dim);
  for (int v = 0; v < corpus.recipe.vocab; ++v) corpus.patterns.set_row(v, patterns[v]);

  for (const auto& entry : manifest.at("items")) {
    CorpusItem item;
    item.tokens = entry.at("tokens").get<std::vector<int>>();
    item.features = read_matrix_csv(dir / entry.at("file").get<std::string>());
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

// Loss curve CSV: one row per recorded step.
inline void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "step,loss_enc,loss_dp,loss_diff\n";
  for (const LossRecord& r : curve)
    out << r.step << "," << csv_double(r.losses.enc) << "," << csv_double(r.losses.dp) << ","
        << csv_double(r.losses.diff) << "\n";
}

}  // namespace difftts
