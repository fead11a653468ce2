#pragma once

#include "jenseff/ingest.hpp"
#include "jenseff/jensen.hpp"
#include "jenseff/simgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jenseff::io {

using nlohmann::json;

/// Round-trip-exact decimal formatting used in every CSV the artifact writes.
std::string format_double(double value);

std::uint64_t fnv1a(const std::string& bytes);
std::string digest_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Minimal CSV table: header plus string cells. The reader that makes every
/// CSV we emit round-trippable.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& content, const std::string& what);

json basis_to_json(const BasisSystem& b);
BasisSystem basis_from_json(const json& j);

json dataset_to_json(const AssembledDataset& a);

struct LoadedDataset {
    FsimDataset ds;
    std::vector<RowProvenance> provenance;
    BasisSystem beta_basis;
    BasisSystem g_basis;
    Vector lambda_g_grid;
    Vector lambda_beta_grid;
};
LoadedDataset dataset_from_json(const json& j, const std::string& what);

json fit_to_json(const FsimFit& fit);

std::string surface_to_csv(const JensenSurface& s, const std::string& manifest_digest);
json surface_to_json(const JensenSurface& s);

std::string power_to_csv(const std::vector<PowerPoint>& points, int n, double sigma,
                         const std::string& manifest_digest);
std::string rates_to_csv(const StudyConfig& cfg, const StudyResult& res,
                         const std::string& manifest_digest);
json per_seed_to_json(const StudyResult& res);

/// Series CSV schema: header site_id,time_days,<value_column>; UTF-8, '.'
/// decimal separator. Rows are grouped by site and sorted by time.
std::map<std::string, IrregularSeries> parse_series_csv(const std::string& content,
                                                        const std::string& value_column,
                                                        const std::string& what);

json curvature_report_to_json(const CurvatureReport& rep);
CurvatureReport curvature_report_from_json(const json& j);

/// Run manifest: resolved config plus input digests. config_digest covers
/// everything except the timestamps, so identical configurations produce
/// byte-identical outputs while the manifest still records when it ran.
struct Manifest {
    std::string subcommand;
    json config;  // flat key/value
    std::map<std::string, std::string> input_digests;
    std::string artifact_version = "0.1.0";
    std::string started_at;
    std::string finished_at;

    std::string config_digest() const;
    json to_json() const;
};

}  // namespace jenseff::io
