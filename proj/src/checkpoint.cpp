#include "fira/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fira/error.hpp"

namespace fira {

namespace {

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw ParameterError("checkpoint: expected '" + token + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T value{};
  if (!(in >> value)) throw ParameterError(std::string("checkpoint: cannot read ") + what);
  return value;
}

double read_real(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw ParameterError("checkpoint: truncated matrix data");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParameterError("checkpoint: bad real '" + token + "'");
  }
  return value;
}

}  // namespace

void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_real(m(r, c));
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, const char* name) {
  expect(in, "matrix");
  expect(in, name);
  const auto rows = read_value<std::size_t>(in, "rows");
  const auto cols = read_value<std::size_t>(in, "cols");
  std::vector<double> data(rows * cols);
  for (double& x : data) x = read_real(in);
  return Matrix(rows, cols, std::move(data));
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const FiraState& s = checkpoint.state;
  out << "fira-checkpoint 1\n";
  out << "step_count " << s.moments.step_count << '\n';
  out << "prev_residual_norm "
      << (s.prev_residual_norm ? format_real(*s.prev_residual_norm) : std::string("unset"))
      << '\n';
  out << "scaling " << to_string(s.scaling_mode) << '\n';
  out << "smoothing " << to_string(s.smoothing_mode) << '\n';
  write_matrix(out, "m_first", s.moments.m_first);
  write_matrix(out, "v_second", s.moments.v_second);
  if (!checkpoint.projector) {
    out << "projector none\n";
    return;
  }
  const GradProjector& p = *checkpoint.projector;
  out << "projector present\n";
  out << "weight_shape " << p.weight_rows() << ' ' << p.weight_cols() << '\n';
  out << "switch_period " << p.switch_period() << '\n';
  out << "last_refresh_step " << p.last_refresh_step() << '\n';
  write_matrix(out, "basis", p.basis());
}

Checkpoint read_checkpoint(std::istream& in) {
  expect(in, "fira-checkpoint");
  expect(in, "1");
  Checkpoint cp;
  expect(in, "step_count");
  cp.state.moments.step_count = read_value<std::int64_t>(in, "step_count");
  expect(in, "prev_residual_norm");
  const auto prev = read_value<std::string>(in, "prev_residual_norm");
  if (prev != "unset") {
    std::istringstream tmp(prev);
    cp.state.prev_residual_norm = read_real(tmp);
  }
  expect(in, "scaling");
  cp.state.scaling_mode = parse_scaling_mode(read_value<std::string>(in, "scaling"));
  expect(in, "smoothing");
  cp.state.smoothing_mode = parse_smoothing_mode(read_value<std::string>(in, "smoothing"));
  cp.state.moments.m_first = read_matrix(in, "m_first");
  cp.state.moments.v_second = read_matrix(in, "v_second");
  expect(in, "projector");
  const auto presence = read_value<std::string>(in, "projector");
  if (presence == "none") return cp;
  if (presence != "present") throw ParameterError("checkpoint: bad projector marker");
  expect(in, "weight_shape");
  const auto m = read_value<std::size_t>(in, "weight rows");
  const auto n = read_value<std::size_t>(in, "weight cols");
  expect(in, "switch_period");
  const auto period = read_value<std::size_t>(in, "switch_period");
  expect(in, "last_refresh_step");
  const auto last = read_value<std::int64_t>(in, "last_refresh_step");
  cp.projector.emplace(read_matrix(in, "basis"), m, n, period, last);
  return cp;
}

}  // namespace fira
