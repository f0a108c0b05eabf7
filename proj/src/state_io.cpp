// Text checkpoint of a SolverState. Doubles are written in shortest
// round-trip form, so a reloaded state continues bit-identically.

#include "hessolve/errors.hpp"
#include "hessolve/solver.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>

namespace hessolve {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ParseError("state block data does not match its shape", 0);
  Matrix m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[pos++].get<double>();
  return m;
}

json row_to_json(const RowVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

RowVector row_from_json(const json& j) {
  RowVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

void save_state(const SolverState& state, std::ostream& os) {
  json blocks = json::array();
  for (const auto& b : state.ustar_nk) blocks.push_back(matrix_to_json(b));
  json doc{{"format", "hessolve-state"},
           {"version", 1},
           {"n", state.n},
           {"ustar", row_to_json(state.ustar.transpose())},
           {"ustar_nk", std::move(blocks)}};
  if (state.last_checkpoint) {
    json segs = json::array();
    for (const auto& s : state.last_checkpoint->pi_hat.segments) segs.push_back(row_to_json(s));
    doc["checkpoint"] = json{{"level", state.last_checkpoint->level}, {"segments", segs}};
  }
  os << doc.dump() << '\n';
}

SolverState load_state(std::istream& is) {
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("solver state is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (doc.at("format") != "hessolve-state") throw ParseError("not a hessolve state file", 0);
    SolverState state;
    state.n = doc.at("n").get<Level>();
    state.ustar = row_from_json(doc.at("ustar")).transpose();
    for (const auto& b : doc.at("ustar_nk")) state.ustar_nk.push_back(matrix_from_json(b));
    if (static_cast<Level>(state.ustar_nk.size()) != state.n + 1)
      throw ParseError("state holds " + std::to_string(state.ustar_nk.size()) +
                           " blocks, expected n+1 = " + std::to_string(state.n + 1),
                       0);
    for (const auto& b : state.ustar_nk)
      if (b.rows() != state.ustar.size())
        throw ParseError("state block height differs from u* width", 0);
    if (doc.contains("checkpoint")) {
      SolverState::Checkpoint cp;
      cp.level = doc["checkpoint"].at("level").get<Level>();
      for (const auto& s : doc["checkpoint"].at("segments"))
        cp.pi_hat.segments.push_back(row_from_json(s));
      state.last_checkpoint = std::move(cp);
    }
    return state;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed solver state: ") + e.what(), 0);
  }
}

}  // namespace hessolve
