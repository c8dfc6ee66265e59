#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fira/error.hpp"
#include "fira/train.hpp"

namespace fira {

namespace {

constexpr const char* kSuffixes[] = {"_grad_norm", "_resid_norm", "_phi"};

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& cell, std::size_t line_no) {
  double value = 0.0;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParameterError("metrics csv line " + std::to_string(line_no) + ": bad number '" +
                         cell + "'");
  }
  return value;
}

}  // namespace

void write_train_csv(std::ostream& out, const TrainRecord& record) {
  out << "step,loss";
  for (const std::string& name : record.matrix_names) {
    for (const char* suffix : kSuffixes) out << ',' << name << suffix;
  }
  out << '\n';
  for (const TrainRow& row : record.rows) {
    out << row.step << ',' << format_real(row.loss);
    for (const MatrixTrace& m : row.matrices) {
      out << ',' << format_real(m.grad_norm) << ',' << format_real(m.resid_norm) << ','
          << format_real(m.phi);
    }
    out << '\n';
  }
}

TrainRecord read_train_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("metrics csv: empty input");
  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 2 || header[0] != "step" || header[1] != "loss" ||
      (header.size() - 2) % 3 != 0) {
    throw ParameterError("metrics csv: unexpected header");
  }
  TrainRecord record;
  for (std::size_t i = 2; i < header.size(); i += 3) {
    const std::string& first = header[i];
    const std::string suffix = kSuffixes[0];
    if (first.size() <= suffix.size() ||
        first.compare(first.size() - suffix.size(), suffix.size(), suffix) != 0) {
      throw ParameterError("metrics csv: malformed column '" + first + "'");
    }
    const std::string name = first.substr(0, first.size() - suffix.size());
    for (int k = 1; k < 3; ++k) {
      if (header[i + k] != name + kSuffixes[k]) {
        throw ParameterError("metrics csv: malformed column '" + header[i + k] + "'");
      }
    }
    record.matrix_names.push_back(name);
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParameterError("metrics csv line " + std::to_string(line_no) +
                           ": wrong number of fields");
    }
    TrainRow row;
    row.step = static_cast<std::int64_t>(parse_real(cells[0], line_no));
    row.loss = parse_real(cells[1], line_no);
    for (std::size_t i = 2; i < cells.size(); i += 3) {
      row.matrices.push_back({parse_real(cells[i], line_no), parse_real(cells[i + 1], line_no),
                              parse_real(cells[i + 2], line_no)});
    }
    record.rows.push_back(std::move(row));
  }
  return record;
}

}  // namespace fira
