#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "secbf/attack.hpp"
#include "secbf/model.hpp"
#include "secbf/reconstruction.hpp"
#include "secbf/safety.hpp"

namespace secbf::io {

using nlohmann::json;

/// {"rows": R, "cols": C, "data": [row-major numbers]}
json matrix_to_json(const MatrixXd& M);
/// Throws InvalidInput naming `what` on malformed input.
MatrixXd matrix_from_json(const json& j, const std::string& what = "matrix");

json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j, const std::string& what = "vector");

/// {"start_time": k, "inputs": [[u(0)], ...], "outputs": [[y(0)], ...]}
DataWindow<double> window_from_json(const json& j, Eigen::Index m, Eigen::Index p);
json window_to_json(const DataWindow<double>& w);

/// {"time": tau, "s": s, "entries": [{"gamma", "kind", "base", "kernel"}]};
/// kernel lists basis vectors.
json plausible_set_to_json(const PlausibleSet<double>& ps);

json offline_report_to_json(const OfflineReport<double>& rep);

json trace_to_json(const SimTrace& trace);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace secbf::io
