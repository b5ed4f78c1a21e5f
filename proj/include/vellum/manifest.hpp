#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "vellum/pipeline.hpp"

namespace vellum {

using Json = nlohmann::json;

Json to_json(const PipelineConfig& c);
PipelineConfig config_from_json(const Json& j);

Json to_json(const SegmentCommand& c);
Json to_json(const TvCommand& c);
Json to_json(const InpaintCommand& c);
Json to_json(const RestoreCommand& c);
Json to_json(const OsmosisCommand& c);
Json to_json(const StereoCommand& c);

/// Writes out_dir/manifest.json: command, parameters, SHA-256 of every
/// input file and output artifact. The output contains no timestamps or
/// output-directory paths, so equal runs give byte-identical manifests.
std::filesystem::path write_manifest(const std::filesystem::path& out_dir, const std::string& command, const Json& params,
                                     const std::map<std::string, std::filesystem::path>& inputs,
                                     const std::vector<std::string>& outputs,
                                     const std::vector<std::string>& warnings = {});

struct ReplayReport {
    std::filesystem::path manifest;
    std::vector<std::string> matched;
    std::vector<std::string> mismatched;

    bool ok() const { return mismatched.empty(); }
};

/// Re-runs the recorded command into `out_dir` after checking that every
/// input still has its recorded hash, then compares output hashes.
ReplayReport replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out_dir);

} // namespace vellum
