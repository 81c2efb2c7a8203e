#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sweep/document_store.hpp"
#include "sweep/file_store.hpp"
#include "sweep/model.hpp"

namespace sweep {

enum class JobKind { run, analysis };

std::string_view to_string(JobKind kind);
Collection collection_of(JobKind kind);

/// Snapshot of a Run or Analysis document as seen by lifecycle code.
struct JobHandle {
  JobKind kind = JobKind::run;
  std::string id;
  std::int64_t revision = 0;
  JobRecord job;
  json doc;
};

template <typename T>
struct Registered {
  T value;
  std::vector<std::string> warnings;
};

/// Typed access to the document store and file store under one data root:
///   <data_root>/db     documents
///   <data_root>/files  result trees
class Catalog {
 public:
  explicit Catalog(const std::filesystem::path& data_root, bool durable = true);

  const std::filesystem::path& data_root() const { return data_root_; }
  DocumentStore& documents() { return documents_; }
  const DocumentStore& documents() const { return documents_; }
  FileStore& files() { return files_; }
  const FileStore& files() const { return files_; }

  Host add_host(Host host);
  Host host(std::string_view id) const;
  /// Accepts an id or a unique name.
  Host resolve_host(std::string_view id_or_name) const;
  std::vector<Host> hosts() const;

  Registered<Simulator> add_simulator(Simulator simulator);
  Simulator simulator(std::string_view id) const;
  Simulator resolve_simulator(std::string_view id_or_name) const;
  std::vector<Simulator> simulators() const;
  /// Rejected with Error(duplicate_key) once ParameterSets exist.
  Simulator update_parameter_definitions(std::string_view simulator_id,
                                         std::vector<ParameterDefinition> definitions);

  /// Returns the existing ParameterSet for the canonical point, or persists a
  /// new one. Safe under concurrent callers and processes.
  std::pair<ParameterSet, bool> find_or_create_parameter_set(const Simulator& simulator,
                                                             const json& values);
  ParameterSet parameter_set(std::string_view id) const;
  std::vector<ParameterSet> parameter_sets(std::string_view simulator_id) const;

  /// Creates Runs (status created, smallest unused seeds) until the
  /// ParameterSet holds `target_count`; returns all of its Runs by seed.
  std::vector<Run> find_or_create_runs_upto(const ParameterSet& parameter_set, int target_count,
                                            std::string_view host_id);
  Run run(std::string_view id) const;
  std::vector<Run> runs(const Query& query = {}) const;
  std::vector<Run> runs_of(std::string_view parameter_set_id) const;

  Registered<Analyzer> add_analyzer(Analyzer analyzer);
  Analyzer analyzer(std::string_view id) const;
  std::vector<Analyzer> analyzers(std::optional<std::string> simulator_id = {}) const;
  Analysis analysis(std::string_view id) const;
  std::vector<Analysis> analyses(const Query& query = {}) const;

  JobHandle load_job(JobKind kind, std::string_view id) const;
  std::vector<JobHandle> jobs(JobKind kind, const Query& query = {}) const;
  /// Writes `next` into the handle's document iff nobody changed it since
  /// the handle was loaded. On success the handle is refreshed in place.
  bool update_job(JobHandle& handle, const JobRecord& next);
  /// Lifecycle transition through update_job. Throws
  /// Error(illegal_transition); returns false when the CAS lost.
  bool apply(JobHandle& handle, const Event& event);

  /// Cancels a created or submitted job.
  JobHandle cancel(JobKind kind, std::string_view id);

  /// Destructive: removes a Run that is not in flight, with its results.
  void delete_run(std::string_view id);

  std::filesystem::path reserve_result_dir(const Run& run);
  /// Seals the Run's result directory and records the digest in its document.
  Run seal_result_dir(const Run& run);

  std::string result_dir_for(const JobHandle& handle) const;

 private:
  std::filesystem::path data_root_;
  DocumentStore documents_;
  FileStore files_;
};

}  // namespace sweep
