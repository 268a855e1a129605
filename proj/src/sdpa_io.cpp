#include "lkfkit/sdpa_io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace lkfkit {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void emit_matrix(std::string& out, int matno, int blkno, const Eigen::MatrixXd& M) {
  const int dim = static_cast<int>(M.rows());
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      if (M(i, j) != 0.0)
        out += std::to_string(matno) + " " + std::to_string(blkno) + " " + std::to_string(i + 1) +
               " " + std::to_string(j + 1) + " " + fmt17(M(i, j)) + "\n";
}

}  // namespace

std::string export_sdpa(const SdpProblem& p) {
  std::string out;
  out += std::to_string(p.num_vars) + "\n";
  out += std::to_string(p.blocks.size()) + "\n";
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    if (b) out += " ";
    out += std::to_string(p.blocks[b].dim);
  }
  out += "\n";
  for (int k = 0; k < p.num_vars; ++k) {
    if (k) out += " ";
    out += "0";
  }
  out += "\n";

  // matno-major entry order: constants first, then one variable at a time
  for (std::size_t b = 0; b < p.blocks.size(); ++b)
    emit_matrix(out, 0, static_cast<int>(b) + 1, p.blocks[b].C);
  std::vector<std::size_t> cursor(p.blocks.size(), 0);  // terms are sorted by index
  for (int k = 0; k < p.num_vars; ++k) {
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      const auto& blk = p.blocks[b];
      std::size_t& cur = cursor[b];
      while (cur < blk.terms.size() && blk.terms[cur].first < k) ++cur;
      if (cur >= blk.terms.size() || blk.terms[cur].first != k) continue;
      emit_matrix(out, k + 1, static_cast<int>(b) + 1, blk.terms[cur].second.dense(blk.dim));
    }
  }
  return out;
}

SdpProblem import_sdpa(const std::string& text) {
  SdpProblem p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int header_stage = 0;  // 0: m, 1: nblocks, 2: sizes, 3: objective, 4: entries
  int nblocks = 0;

  auto fail = [&](const std::string& what) {
    throw std::runtime_error("sdpa parse error, line " + std::to_string(lineno) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char c0 = line[0];
    if (c0 == '"' || c0 == '*') continue;  // comment
    std::istringstream ls(line);
    if (header_stage == 0) {
      if (!(ls >> p.num_vars) || p.num_vars < 0) fail("bad variable count");
      header_stage = 1;
    } else if (header_stage == 1) {
      if (!(ls >> nblocks) || nblocks < 1) fail("bad block count");
      header_stage = 2;
    } else if (header_stage == 2) {
      for (int b = 0; b < nblocks; ++b) {
        long long s = 0;
        char sep;
        while (ls.peek() == ',' || ls.peek() == '(' || ls.peek() == ')' || ls.peek() == '{' ||
               ls.peek() == '}')
          ls >> sep;
        if (!(ls >> s) || s == 0) fail("bad block size");
        SdpConstraintBlock blk;
        blk.dim = static_cast<int>(s < 0 ? -s : s);
        blk.label = "block_" + std::to_string(b + 1);
        blk.sense = Sense::StrictlyPositive;
        blk.delta = 0.0;
        blk.C = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
        p.blocks.push_back(std::move(blk));
      }
      header_stage = 3;
    } else if (header_stage == 3) {
      // objective row; values ignored (feasibility form)
      header_stage = 4;
    } else {
      int matno, blkno, i, j;
      double v;
      char sep;
      while (ls.peek() == ',' || ls.peek() == ' ') ls >> sep;
      if (!(ls >> matno >> blkno >> i >> j >> v)) fail("bad entry");
      if (matno < 0 || matno > p.num_vars) fail("matrix index out of range");
      if (blkno < 1 || blkno > nblocks) fail("block index out of range");
      SdpConstraintBlock& blk = p.blocks[static_cast<std::size_t>(blkno - 1)];
      if (i < 1 || j < 1 || i > blk.dim || j > blk.dim) fail("entry position out of range");
      if (i > j) std::swap(i, j);
      if (matno == 0) {
        blk.C(i - 1, j - 1) += v;
        if (i != j) blk.C(j - 1, i - 1) += v;
      } else {
        auto it = blk.terms.begin();
        for (; it != blk.terms.end(); ++it)
          if (it->first == matno - 1) break;
        if (it == blk.terms.end()) {
          blk.terms.emplace_back(matno - 1, SymCoeff{});
          it = std::prev(blk.terms.end());
        }
        it->second.tri.push_back({i - 1, j - 1, v});
      }
    }
  }
  if (header_stage < 4) fail("truncated header");
  for (auto& blk : p.blocks) blk.original_constant = -blk.C;
  // keep term lists sorted by variable index
  for (auto& blk : p.blocks)
    std::sort(blk.terms.begin(), blk.terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  return p;
}

}  // namespace lkfkit
