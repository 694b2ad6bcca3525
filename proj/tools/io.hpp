#pragma once

// Serialization for the command-line tool: CSV ingestion, the JSON schemas for
// basis/kernel/tilt/simulation configs, and the versioned model artifact. The
// library itself stays format-agnostic; everything file-shaped lives here.

#include <optional>
#include <string>
#include <vector>

#include "condcal/calibrate.hpp"
#include "condcal/estimate.hpp"
#include "condcal/eval.hpp"
#include "json.hpp"

namespace condcal::io {

using nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

// Numeric CSV with a mandatory header row. Parse errors name the offending
// row and column.
struct CsvTable {
    std::vector<std::string> names;
    Matrix values;

    int col(const std::string& name) const;  // -1 when absent
    Vector column(const std::string& name) const;
    int rows() const { return static_cast<int>(values.rows()); }
};

CsvTable read_csv(const std::string& path);

// Covariate block x1..xp; every index 1..p must be present.
Matrix feature_matrix(const CsvTable& t);
// Class-probability block pi_1..pi_k; zero columns when absent.
Matrix pi_matrix(const CsvTable& t);

json read_json_file(const std::string& path);

// Feature and column indices are 1-based in JSON to match the x1..xp CSV
// headers. Infinite interval endpoints are omitted or spelled "inf"/"-inf".
BasisSpec basis_from_json(const json& j);
json basis_to_json(const BasisSpec& b);

KernelSpec kernel_from_json(const json& j);
json kernel_to_json(const KernelSpec& k);

struct NamedTilt {
    std::string name;
    TiltSpec tilt;
};
std::vector<NamedTilt> tilts_from_json(const json& j);

// Simulation request: SimRunConfig fields plus the method list
// (randomized | unrandomized | vanilla).
struct SimulationRequest {
    SimRunConfig base;
    std::vector<std::string> methods;
};
SimulationRequest simulation_from_json(const json& j);

// Whole-file write via a temp file in the same directory plus rename, so a
// failed command never leaves a partial output behind.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Model artifact: the calibration inputs and fitted base model. Only
// serializable configurations are supported (no callable basis columns, no
// caller-supplied Gram matrices).
struct ModelArtifact {
    double alpha = 0.1;
    ScoreKind score = ScoreKind::identity;
    BasisSpec basis;
    std::optional<KernelSpec> kernel;
    std::optional<double> lip_lambda;
    CalibrationSet calib;
    std::string digest;  // hex fnv1a-64 of config + calibration bytes
};

std::string config_digest(const ModelArtifact& art);

// Layout: 8-byte magic "CONDCAL1", uint32 little-endian header length, JSON
// header, then row-major little-endian float64 blocks in header order.
std::string model_to_bytes(const ModelArtifact& art, const CalibratedModel& fit);
// Verifies magic, format version, declared shapes, and the config digest.
ModelArtifact model_from_bytes(const std::string& bytes);

// Rebuild the calibrated model from a loaded artifact; the fit is a
// deterministic function of the artifact contents.
CalibratedModel refit_model(const ModelArtifact& art);

}  // namespace condcal::io
