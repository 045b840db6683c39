#include "secbf/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace secbf::io {

namespace {

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

json matrix_to_json(const MatrixXd& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data"))
    throw InvalidInput(what + ": expected {\"rows\", \"cols\", \"data\"}");
  if (!j["rows"].is_number_integer() || !j["cols"].is_number_integer() ||
      !j["data"].is_array())
    throw InvalidInput(what + ": rows/cols must be integers and data an array");
  const auto rows = j["rows"].get<long long>();
  const auto cols = j["cols"].get<long long>();
  if (rows < 0 || cols < 0) throw InvalidInput(what + ": negative dimension");
  const auto& data = j["data"];
  if (static_cast<long long>(data.size()) != rows * cols)
    throw InvalidInput(what + ": data has " + std::to_string(data.size()) +
                       " entries, expected rows*cols = " +
                       std::to_string(rows * cols));
  MatrixXd M(rows, cols);
  for (long long i = 0; i < rows; ++i)
    for (long long c = 0; c < cols; ++c) {
      const auto& v = data[static_cast<std::size_t>(i * cols + c)];
      if (!v.is_number()) throw InvalidInput(what + ": non-numeric entry");
      M(i, c) = v.get<double>();
    }
  if (!M.allFinite()) throw InvalidInput(what + ": non-finite entry");
  return M;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v(i)));
  return a;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + ": expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  if (!v.allFinite()) throw InvalidInput(what + ": non-finite entry");
  return v;
}

DataWindow<double> window_from_json(const json& j, Eigen::Index m, Eigen::Index p) {
  if (!j.is_object() || !j.contains("outputs"))
    throw InvalidInput("data: expected an object with \"outputs\"");
  const auto& outs = j["outputs"];
  const json ins = j.value("inputs", json::array());
  if (!outs.is_array() || outs.empty()) throw InvalidInput("data.outputs: empty");
  DataWindow<double> w;
  w.start_time = j.value("start_time", std::size_t{0});
  w.outputs.resize(p, static_cast<Eigen::Index>(outs.size()));
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const auto y = vector_from_json(outs[k], "data.outputs[" + std::to_string(k) + "]");
    if (y.size() != p) throw InvalidInput("data.outputs: each sample needs p entries");
    w.outputs.col(static_cast<Eigen::Index>(k)) = y;
  }
  w.inputs.resize(m, static_cast<Eigen::Index>(ins.size()));
  for (std::size_t k = 0; k < ins.size(); ++k) {
    const auto u = vector_from_json(ins[k], "data.inputs[" + std::to_string(k) + "]");
    if (u.size() != m) throw InvalidInput("data.inputs: each sample needs m entries");
    w.inputs.col(static_cast<Eigen::Index>(k)) = u;
  }
  if (w.inputs.cols() + 1 != w.outputs.cols())
    throw InvalidInput("data: need exactly one more output than inputs");
  return w;
}

json window_to_json(const DataWindow<double>& w) {
  json ins = json::array(), outs = json::array();
  for (Eigen::Index k = 0; k < w.inputs.cols(); ++k)
    ins.push_back(vector_to_json(w.inputs.col(k)));
  for (Eigen::Index k = 0; k < w.outputs.cols(); ++k)
    outs.push_back(vector_to_json(w.outputs.col(k)));
  return {{"start_time", w.start_time}, {"inputs", ins}, {"outputs", outs}};
}

json plausible_set_to_json(const PlausibleSet<double>& ps) {
  json entries = json::array();
  for (const auto& e : ps.entries) {
    json je{{"gamma", e.gamma.indices()}, {"kind", to_string(e.solution.kind)}};
    if (!e.solution.empty()) {
      je["base"] = vector_to_json(e.solution.base);
      json K = json::array();
      for (Eigen::Index c = 0; c < e.solution.kernel.dim(); ++c)
        K.push_back(vector_to_json(e.solution.kernel.vectors.col(c)));
      je["kernel"] = K;
    }
    entries.push_back(je);
  }
  return {{"time", ps.time_index}, {"s", ps.s}, {"entries", entries}};
}

json offline_report_to_json(const OfflineReport<double>& rep) {
  json ci = json::array();
  for (const auto& [lambda, ok] : rep.cond_i)
    ci.push_back({{"lambda", lambda.indices()}, {"included", ok}});
  json cii{{"kind", to_string(rep.cond_ii.kind)},
           {"samples_checked", rep.cond_ii.samples_checked}};
  if (rep.cond_ii.witness) cii["witness"] = vector_to_json(*rep.cond_ii.witness);
  return {{"sparse_obs_ok", rep.sparse_obs_ok},
          {"p_gt_2s", rep.p_gt_2s},
          {"cond_i", ci},
          {"cond_ii", cii},
          {"verdict", rep.verdict}};
}

json trace_to_json(const SimTrace& trace) {
  json steps = json::array();
  for (const auto& st : trace.steps) {
    json pl = json::array();
    for (const auto& x : st.plausible) pl.push_back(vector_to_json(x));
    json js{{"step", st.step},
            {"x_true", vector_to_json(st.x_true)},
            {"u_nom", vector_to_json(st.u_nom)},
            {"u", vector_to_json(st.u)},
            {"y", vector_to_json(st.y)},
            {"plausible", pl},
            {"margin_true", vector_to_json(st.margin_true)},
            {"status", to_string(st.status)}};
    if (st.x_fake.size()) {
      js["x_fake"] = vector_to_json(st.x_fake);
      js["margin_fake"] = vector_to_json(st.margin_fake);
    }
    steps.push_back(std::move(js));
  }
  return {{"dt", trace.dt},
          {"n", trace.n},
          {"m", trace.m},
          {"p", trace.p},
          {"premise_checked", trace.premise_checked},
          {"premise_ok", trace.premise_ok},
          {"termination", to_string(trace.termination)},
          {"message", trace.message},
          {"steps", steps}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace secbf::io
