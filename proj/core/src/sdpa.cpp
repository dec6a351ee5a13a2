#include "loopcert/sdp/sdpa.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "loopcert/errors.hpp"

namespace loopcert {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void export_sdpa(const SdpProblem& problem, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");

  const int m = problem.num_constraints();
  const bool has_free = problem.num_free > 0;
  const int nblocks = static_cast<int>(problem.blocks.size()) + (has_free ? 1 : 0);

  os << m << "\n";
  os << nblocks << "\n";
  for (size_t b = 0; b < problem.blocks.size(); ++b) {
    if (b) os << " ";
    const auto& blk = problem.blocks[b];
    os << (blk.kind == SdpBlock::Kind::Psd ? blk.dim : -blk.dim);
  }
  if (has_free) {
    if (!problem.blocks.empty()) os << " ";
    os << -(2 * problem.num_free);
  }
  os << "\n";
  for (int k = 0; k < m; ++k) {
    if (k) os << " ";
    os << fmt17(problem.rhs[k]);
  }
  os << "\n";

  const int free_block = static_cast<int>(problem.blocks.size()) + 1;  // 1-based
  auto write_matrix = [&](int matno, const std::vector<SdpCoeff>& entries,
                          const std::vector<std::pair<int, double>>& free_entries) {
    for (const auto& e : entries) {
      os << matno << " " << (e.block + 1) << " " << (e.i + 1) << " " << (e.j + 1) << " "
         << fmt17(e.value) << "\n";
    }
    for (const auto& [idx, v] : free_entries) {
      // free variable u = t+ - t- as a diagonal pair
      os << matno << " " << free_block << " " << (2 * idx + 1) << " " << (2 * idx + 1)
         << " " << fmt17(v) << "\n";
      os << matno << " " << free_block << " " << (2 * idx + 2) << " " << (2 * idx + 2)
         << " " << fmt17(-v) << "\n";
    }
  };

  write_matrix(0, problem.objective_matrix, problem.objective_free);
  for (int k = 0; k < m; ++k)
    write_matrix(k + 1, problem.constraint_matrix[k], problem.constraint_free[k]);
  if (!os) throw Error("write failure on '" + path + "'");
}

SdpProblem import_sdpa(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");

  auto next_data_line = [&](std::string& line) {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line[0] == '*' || line[0] == '"') continue;  // comment conventions
      return true;
    }
    return false;
  };

  std::string line;
  if (!next_data_line(line)) throw Error("empty SDPA file");
  int m = std::stoi(line);
  if (!next_data_line(line)) throw Error("missing block count");
  int nblocks = std::stoi(line);

  SdpProblem p;
  if (!next_data_line(line)) throw Error("missing block sizes");
  {
    std::istringstream bs(line);
    for (int b = 0; b < nblocks; ++b) {
      int d;
      if (!(bs >> d)) throw Error("bad block size line");
      p.add_block(d >= 0 ? SdpBlock::Kind::Psd : SdpBlock::Kind::Diag, std::abs(d));
    }
  }
  if (!next_data_line(line)) throw Error("missing right-hand sides");
  {
    std::istringstream bs(line);
    for (int k = 0; k < m; ++k) {
      double b;
      if (!(bs >> b)) throw Error("bad rhs line");
      p.add_constraint(b);
    }
  }
  while (next_data_line(line)) {
    std::istringstream es(line);
    int matno, block, i, j;
    double v;
    if (!(es >> matno >> block >> i >> j >> v)) throw Error("bad entry line: " + line);
    if (block < 1 || block > nblocks) throw Error("block index out of range: " + line);
    if (matno == 0) {
      p.add_objective_entry(block - 1, i - 1, j - 1, v);
    } else if (matno >= 1 && matno <= m) {
      p.add_entry(matno - 1, block - 1, i - 1, j - 1, v);
    } else {
      throw Error("matrix index out of range: " + line);
    }
  }
  return p;
}

}  // namespace loopcert
