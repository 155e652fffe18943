#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlalign/common/digest.hpp"
#include "xlalign/synthlang/corpus.hpp"

namespace xlalign::pipeline {

namespace fs = std::filesystem;

struct ParentRef {
  std::string kind;
  std::string path;
  std::string sha256;
};

/// Sidecar record written next to every artifact as `<artifact>.meta.json`.
struct ArtifactMeta {
  std::string kind;  // corpus | checkpoint | samples | scored | prefs | rft | eval | report | train_report
  std::string sha256;
  std::string command;
  std::string config_digest;
  std::string config_snapshot;
  /// Digest of the corpus every artifact ultimately derives from.
  std::string corpus_sha256;
  std::vector<ParentRef> parents;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

inline fs::path meta_path(const fs::path& artifact) {
  fs::path p = artifact;
  if (!p.has_filename()) p = p.parent_path();
  return p.string() + ".meta.json";
}

/// File: sha256 of the bytes. Directory: sha256 over the sorted
/// (relative name, file digest) list, sidecars excluded.
inline std::string artifact_digest(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_file(p.string());
  if (!fs::is_directory(p)) throw ValidationError("missing artifact " + p.string());
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), p).generic_string();
    if (rel.ends_with(".meta.json")) continue;
    files.emplace_back(rel, sha256_file(e.path().string()));
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& [name, d] : files) h.update(name).update("\n").update(d).update("\n");
  return h.hex();
}

inline nlohmann::ordered_json to_json(const ArtifactMeta& m) {
  nlohmann::ordered_json parents = nlohmann::ordered_json::array();
  for (const auto& p : m.parents) parents.push_back({{"kind", p.kind}, {"path", p.path}, {"sha256", p.sha256}});
  return {{"kind", m.kind},
          {"sha256", m.sha256},
          {"command", m.command},
          {"config_digest", m.config_digest},
          {"config_snapshot", m.config_snapshot},
          {"corpus_sha256", m.corpus_sha256},
          {"parents", parents},
          {"extra", m.extra}};
}

inline ArtifactMeta meta_from_json(const nlohmann::json& j) {
  ArtifactMeta m;
  m.kind = j.at("kind").get<std::string>();
  m.sha256 = j.at("sha256").get<std::string>();
  m.command = j.value("command", std::string());
  m.config_digest = j.value("config_digest", std::string());
  m.config_snapshot = j.value("config_snapshot", std::string());
  m.corpus_sha256 = j.value("corpus_sha256", std::string());
  for (const auto& p : j.value("parents", nlohmann::json::array()))
    m.parents.push_back({p.at("kind").get<std::string>(), p.at("path").get<std::string>(),
                         p.at("sha256").get<std::string>()});
  if (j.contains("extra")) m.extra = nlohmann::ordered_json::parse(j.at("extra").dump());
  return m;
}

/// Computes the digest of `artifact`, fills it into `m`, writes the sidecar.
inline ArtifactMeta seal(const fs::path& artifact, ArtifactMeta m) {
  m.sha256 = artifact_digest(artifact);
  std::ofstream(meta_path(artifact), std::ios::trunc) << to_json(m).dump(2) << '\n';
  return m;
}

inline ArtifactMeta read_meta(const fs::path& artifact) {
  const fs::path mp = meta_path(artifact);
  std::ifstream in(mp);
  if (!in) throw ValidationError("missing artifact metadata " + mp.string());
  try {
    return meta_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed artifact metadata " + mp.string() + ": " + e.what());
  }
}

/// Reads the sidecar and checks kind and content digest.
inline ArtifactMeta verify(const fs::path& artifact, const std::string& kind) {
  if (!fs::exists(artifact)) throw ValidationError("missing artifact " + artifact.string());
  ArtifactMeta m = read_meta(artifact);
  if (m.kind != kind)
    throw ValidationError("artifact " + artifact.string() + " is a " + m.kind + ", expected a " + kind);
  const std::string found = artifact_digest(artifact);
  if (found != m.sha256)
    throw ContractError("digest mismatch for " + artifact.string() + ": expected " + m.sha256 + ", found " + found);
  return m;
}

inline ParentRef parent_of(const fs::path& artifact, const ArtifactMeta& m) {
  return {m.kind, artifact.generic_string(), m.sha256};
}

/// Artifacts derived from different corpora do not mix unless forced.
inline void check_lineage(const std::string& expected_corpus, const ArtifactMeta& m, const fs::path& artifact,
                          bool force) {
  if (force || m.corpus_sha256 == expected_corpus) return;
  throw ContractError("lineage mismatch for " + artifact.string() + ": derived from corpus " + m.corpus_sha256 +
                      ", expected corpus " + expected_corpus + " (use --force to override)");
}

// --- corpus on disk ------------------------------------------------------------

inline constexpr const char* kCorpusFile = "corpus.jsonl";
inline constexpr const char* kCorpusConfigFile = "corpus_config.json";

inline void save_corpus(const fs::path& dir, const synth::Corpus& c) {
  fs::create_directories(dir);
  std::ofstream(dir / kCorpusFile, std::ios::binary | std::ios::trunc) << synth::corpus_to_jsonl(c);
  std::ofstream(dir / kCorpusConfigFile, std::ios::trunc) << synth::corpus_config_to_json(c.config).dump(2) << '\n';
}

/// Regenerates the corpus from its stored config and checks that it
/// reproduces the stored instances byte for byte.
inline synth::Corpus load_corpus(const fs::path& dir) {
  std::ifstream cf(dir / kCorpusConfigFile);
  if (!cf) throw ValidationError("missing " + (dir / kCorpusConfigFile).string());
  auto c = synth::generate_corpus(synth::corpus_config_from_json(nlohmann::json::parse(cf)));
  const std::string stored = sha256_file((dir / kCorpusFile).string());
  const std::string regen = sha256_hex(synth::corpus_to_jsonl(c));
  if (stored != regen)
    throw ContractError("corpus " + dir.string() + " does not match its config: expected " + regen + ", found " +
                        stored);
  return c;
}

}  // namespace xlalign::pipeline
