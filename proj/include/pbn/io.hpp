#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbn/errors.hpp"
#include "pbn/model.hpp"

namespace pbn {

// Text format:
//   pbn <n>
//   perturbation <p>
//   node <name>
//     f <prob> <table> [<parent-name> ...]
//   ...
//   interest <name> [<name> ...]        (optional; default: all nodes)
// '#' starts a comment. <table> is a binary string of length 2^(#parents)
// whose leftmost character is the output for the highest parent valuation.

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == '#') break;
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
  return true;
}

inline double parse_double(const std::string& tok, int line, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw parse_error(line, std::string("cannot parse ") + what + " '" + tok + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& tok, int line, const char* what) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw parse_error(line, std::string("cannot parse ") + what + " '" + tok + "'");
  }
}

}  // namespace detail

inline model parse_model(const std::string& text) {
  struct pending_function {
    double prob;
    std::string table;
    std::vector<std::string> parent_names;
    int line;
  };
  struct pending_node {
    std::string name;
    std::vector<pending_function> functions;
    int line;
  };

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  std::uint64_t declared_n = 0;
  bool have_header = false, have_perturbation = false;
  double p = 0.0;
  std::vector<pending_node> pnodes;
  std::vector<std::string> interest_names;
  bool have_interest = false;

  while (std::getline(in, raw)) {
    ++lineno;
    auto tok = detail::tokenize(raw);
    if (tok.empty()) continue;
    const std::string& kw = tok[0];
    if (!have_header) {
      if (kw != "pbn" || tok.size() != 2) throw parse_error(lineno, "expected 'pbn <n>'");
      declared_n = detail::parse_uint(tok[1], lineno, "node count");
      if (declared_n < 1) throw parse_error(lineno, "node count must be at least 1");
      have_header = true;
    } else if (!have_perturbation) {
      if (kw != "perturbation" || tok.size() != 2)
        throw parse_error(lineno, "expected 'perturbation <p>'");
      p = detail::parse_double(tok[1], lineno, "perturbation rate");
      have_perturbation = true;
    } else if (kw == "node") {
      if (have_interest) throw parse_error(lineno, "node block after interest line");
      if (tok.size() != 2 || !detail::valid_name(tok[1]))
        throw parse_error(lineno, "expected 'node <name>'");
      pnodes.push_back({tok[1], {}, lineno});
    } else if (kw == "f") {
      if (pnodes.empty()) throw parse_error(lineno, "function line before any node");
      if (tok.size() < 3) throw parse_error(lineno, "expected 'f <prob> <table> [parents...]'");
      pending_function pf;
      pf.prob = detail::parse_double(tok[1], lineno, "selection probability");
      pf.table = tok[2];
      pf.parent_names.assign(tok.begin() + 3, tok.end());
      pf.line = lineno;
      pnodes.back().functions.push_back(std::move(pf));
    } else if (kw == "interest") {
      if (have_interest) throw parse_error(lineno, "duplicate interest line");
      interest_names.assign(tok.begin() + 1, tok.end());
      have_interest = true;
    } else {
      throw parse_error(lineno, "unknown directive '" + kw + "'");
    }
  }
  if (!have_header) throw parse_error(lineno, "missing 'pbn <n>' header");
  if (!have_perturbation) throw parse_error(lineno, "missing 'perturbation <p>' line");
  if (pnodes.size() != declared_n)
    throw parse_error(lineno, "declared " + std::to_string(declared_n) + " nodes but found " +
                                  std::to_string(pnodes.size()));

  std::unordered_map<std::string, std::uint32_t> index_of;
  for (std::uint32_t i = 0; i < pnodes.size(); ++i) {
    if (!index_of.emplace(pnodes[i].name, i).second)
      throw parse_error(pnodes[i].line, "duplicate node name '" + pnodes[i].name + "'");
  }

  model m;
  m.perturbation_rate = p;
  m.nodes.resize(pnodes.size());
  for (std::uint32_t i = 0; i < pnodes.size(); ++i) {
    const pending_node& pn = pnodes[i];
    node& nd = m.nodes[i];
    nd.name = pn.name;
    if (pn.functions.empty())
      throw parse_error(pn.line, "node '" + pn.name + "' has no predictor functions");
    for (const pending_function& pf : pn.functions) {
      boolean_function f;
      for (const std::string& pname : pf.parent_names) {
        auto it = index_of.find(pname);
        if (it == index_of.end())
          throw parse_error(pf.line, "unknown parent node '" + pname + "'");
        f.parents.push_back(it->second);
      }
      const std::uint32_t phi = f.parent_count();
      if (phi > boolean_function::kMaxParents)
        throw parse_error(pf.line, "more than 30 parents");
      const std::uint64_t len = 1ULL << phi;
      if (pf.table.size() != len)
        throw parse_error(pf.line, "truth table must have length " + std::to_string(len));
      f.table = boolean_function::empty_table(phi);
      for (std::uint64_t j = 0; j < len; ++j) {
        const char ch = pf.table[j];
        if (ch != '0' && ch != '1') throw parse_error(pf.line, "truth table must be binary");
        f.set_table_bit(len - 1 - j, ch == '1');
      }
      nd.functions.push_back(std::move(f));
      nd.selection_probs.push_back(pf.prob);
    }
  }

  if (have_interest) {
    for (const std::string& name : interest_names) {
      auto it = index_of.find(name);
      if (it == index_of.end())
        throw parse_error(lineno, "interest references unknown node '" + name + "'");
      m.interest.push_back(it->second);
    }
    std::sort(m.interest.begin(), m.interest.end());
    m.interest.erase(std::unique(m.interest.begin(), m.interest.end()), m.interest.end());
  } else {
    m.interest.resize(m.nodes.size());
    for (std::uint32_t i = 0; i < m.nodes.size(); ++i) m.interest[i] = i;
  }

  validate(m);
  return m;
}

inline std::string format_prob(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string serialize_model(const model& m) {
  std::ostringstream out;
  out << "pbn " << m.size() << "\n";
  out << "perturbation " << format_prob(m.perturbation_rate) << "\n";
  for (const node& nd : m.nodes) {
    out << "node " << nd.name << "\n";
    for (std::size_t j = 0; j < nd.functions.size(); ++j) {
      const boolean_function& f = nd.functions[j];
      out << "  f " << format_prob(nd.selection_probs[j]) << " ";
      const std::uint64_t len = 1ULL << f.parent_count();
      for (std::uint64_t v = len; v-- > 0;) out << (f.table_bit(v) ? '1' : '0');
      for (auto pidx : f.parents) out << " " << m.nodes[pidx].name;
      out << "\n";
    }
  }
  if (m.interest.size() != m.nodes.size()) {
    out << "interest";
    for (auto i : m.interest) out << " " << m.nodes[i].name;
    out << "\n";
  }
  return out.str();
}

}  // namespace pbn
