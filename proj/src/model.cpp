#include "bcp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bcp/rng.hpp"

namespace bcp {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

}  // namespace

double theta_of_d(double d) {
  if (d < 0.0) fail("negative edge length");
  return std::exp(-2.0 * d);
}

double p_of_d(const ModelSpec& model, double d) {
  if (d < 0.0) fail("negative edge length");
  if (model.kind == Alphabet::kCfn) return (1.0 - std::exp(-2.0 * d)) / 2.0;
  return (1.0 - std::exp(-4.0 * d)) / 4.0;
}

std::vector<std::vector<double>> transition_matrix(const ModelSpec& model,
                                                   double d) {
  int s = model.state_count();
  double p = p_of_d(model, d);
  std::vector<std::vector<double>> m(s, std::vector<double>(s, p));
  for (int i = 0; i < s; ++i) m[i][i] = 1.0 - (s - 1) * p;
  return m;
}

// --- Random tree generation ---------------------------------------------------

void DeltaBMSpec::validate() const {
  if (n < 2) fail("need at least two leaves");
  if (delta <= 0.0) fail("grid step must be positive");
  if (f <= 0.0) fail("shortest edge must be positive");
  if (g < f) fail("empty length grid (g below f)");
  if (g >= g_star()) fail("longest edge must stay below the solvability threshold");
  auto on_grid = [&](double x) {
    double q = x / delta;
    return std::abs(q - std::round(q)) < 1e-6;
  };
  if (!on_grid(f) || !on_grid(g))
    fail("f and g must be multiples of the grid step");
}

std::vector<double> DeltaBMSpec::length_grid() const {
  validate();
  int steps = static_cast<int>(std::round((g - f) / delta));
  std::vector<double> grid;
  for (int i = 0; i <= steps; ++i) grid.push_back(f + i * delta);
  return grid;
}

PhyloTree random_delta_bm_tree(const DeltaBMSpec& spec, std::uint64_t seed) {
  auto grid = spec.length_grid();

  // Grow the topology by attaching each new leaf to a uniformly random edge;
  // every labelled shape on j leaves ends up equally likely.  Node 0 (leaf 1)
  // serves as a construction root, so edges map 1:1 onto nodes 1..size-1.
  PhyloTree t;
  t.nodes.resize(2);
  t.nodes[0].label = 1;
  t.nodes[0].children = {1};
  t.nodes[1].label = 2;
  t.nodes[1].parent = 0;
  t.root = 0;
  t.rooted = false;

  if (spec.n == 2) {
    // Two leaves joined by one grid edge, hung from a midpoint node so that
    // both endpoints are ordinary leaves.
    std::uint64_t key = stream_key({seed, kTagEdgeLength, 1});
    PhyloTree pair;
    pair.nodes.resize(3);
    pair.root = 0;
    pair.rooted = false;
    pair.nodes[0].children = {1, 2};
    pair.nodes[1] = {0, {}, grid[below_at(key, 0, grid.size())], 1};
    pair.nodes[2] = {0, {}, 0.0, 2};
    pair.check_valid();
    return pair;
  }
  for (int j = 3; j <= spec.n; ++j) {
    std::uint64_t key = stream_key({seed, kTagTopology, static_cast<std::uint64_t>(j)});
    int edge_count = static_cast<int>(t.nodes.size()) - 1;
    int c = 1 + static_cast<int>(below_at(key, 0, edge_count));
    int mid = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    int leaf = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    int p = t.nodes[c].parent;
    std::replace(t.nodes[p].children.begin(), t.nodes[p].children.end(), c, mid);
    t.nodes[mid].parent = p;
    t.nodes[mid].children = {c, leaf};
    t.nodes[c].parent = mid;
    t.nodes[leaf].parent = mid;
    t.nodes[leaf].label = j;
  }

  if (spec.n >= 3) {
    // Hand the tree over in its unrooted form: hung from an internal node.
    t = rehang(t, t.nodes[t.root].children[0]);
    t.rooted = false;
  }

  for (int v = 0; v < static_cast<int>(t.nodes.size()); ++v) {
    if (v == t.root) continue;
    std::uint64_t key = stream_key({seed, kTagEdgeLength, static_cast<std::uint64_t>(v)});
    t.nodes[v].length = grid[below_at(key, 0, grid.size())];
  }
  t.check_valid();
  return t;
}

// --- Simulation ---------------------------------------------------------------

const PackedSeq& CharacterMatrix::row_of(int label) const {
  auto it = std::find(leaf_order.begin(), leaf_order.end(), label);
  if (it == leaf_order.end() || alphabet != Alphabet::kCfn)
    fail("no packed row for leaf " + std::to_string(label));
  return cfn_rows[it - leaf_order.begin()];
}

namespace {

// Top-down node order: parents always precede children.
std::vector<int> topo_order(const PhyloTree& t) {
  std::vector<int> order;
  std::vector<int> stack = {t.root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : t.nodes[v].children) stack.push_back(c);
  }
  return order;
}

// Fill sites [lo, hi) of every node's two-state sequence.  Bounds arrive
// word-aligned so concurrent chunks never touch the same word.
void sim_cfn_chunk(const PhyloTree& t, const std::vector<int>& order,
                   std::int64_t k, std::uint64_t seed, std::int64_t lo,
                   std::int64_t hi, std::vector<PackedSeq>* states) {
  std::uint64_t root_key =
      stream_key({seed, kTagRootState, static_cast<std::uint64_t>(t.root)});
  for (std::int64_t site = lo; site < hi; ++site)
    if (bits_at(root_key, site) >> 63) (*states)[t.root].set_plus(site);
  for (int v : order) {
    if (v == t.root) continue;
    double p = p_of_d(ModelSpec::cfn(), t.nodes[v].length);
    std::uint64_t key =
        stream_key({seed, kTagEdgeFlip, static_cast<std::uint64_t>(v)});
    const PackedSeq& up = (*states)[t.nodes[v].parent];
    for (std::int64_t site = lo; site < hi; ++site) {
      bool flip = bernoulli_at(key, site, p);
      if ((up.get(site) > 0) != flip) (*states)[v].set_plus(site);
    }
  }
}

void sim_jc_chunk(const PhyloTree& t, const std::vector<int>& order,
                  std::int64_t k, std::uint64_t seed, std::int64_t lo,
                  std::int64_t hi,
                  std::vector<std::vector<std::uint8_t>>* states) {
  std::uint64_t root_key =
      stream_key({seed, kTagRootState, static_cast<std::uint64_t>(t.root)});
  for (std::int64_t site = lo; site < hi; ++site)
    (*states)[t.root][site] = static_cast<std::uint8_t>(below_at(root_key, site, 4));
  for (int v : order) {
    if (v == t.root) continue;
    double p = p_of_d(ModelSpec::jc(), t.nodes[v].length);
    std::uint64_t key =
        stream_key({seed, kTagJcTransition, static_cast<std::uint64_t>(v)});
    const auto& up = (*states)[t.nodes[v].parent];
    for (std::int64_t site = lo; site < hi; ++site) {
      double u = u01_at(key, site);
      std::uint8_t s = up[site];
      if (u < 3.0 * p) {
        // Uniform over the three other states.
        int idx = std::min(2, static_cast<int>(u / p));
        s = static_cast<std::uint8_t>((s + 1 + idx) & 3);
      }
      (*states)[v][site] = s;
    }
  }
}

// Run fn(lo, hi) over word-aligned site chunks, optionally in parallel.
template <class Fn>
void for_site_chunks(std::int64_t k, int threads, Fn fn) {
  threads = std::max(1, threads);
  std::int64_t words = (k + 63) / 64;
  std::int64_t per = std::max<std::int64_t>(1, (words + threads - 1) / threads);
  if (threads == 1 || words <= per) {
    fn(0, k);
    return;
  }
  std::vector<std::thread> pool;
  for (std::int64_t w = 0; w < words; w += per) {
    std::int64_t lo = w * 64;
    std::int64_t hi = std::min(k, (w + per) * 64);
    pool.emplace_back([=] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

FullSimulation simulate_full(const PhyloTree& t, const ModelSpec& model,
                             std::int64_t k, std::uint64_t seed, int threads) {
  if (k < 1) fail("need at least one site");
  if (model.kind != Alphabet::kCfn)
    fail("full-state simulation is two-state only");
  auto order = topo_order(t);
  FullSimulation out;
  out.node_states.assign(t.nodes.size(), PackedSeq(k));
  for_site_chunks(k, threads, [&](std::int64_t lo, std::int64_t hi) {
    sim_cfn_chunk(t, order, k, seed, lo, hi, &out.node_states);
  });
  out.leaves.alphabet = Alphabet::kCfn;
  out.leaves.k = k;
  for (int v : t.leaves()) {
    out.leaves.leaf_order.push_back(t.nodes[v].label);
    out.leaves.cfn_rows.push_back(out.node_states[v]);
  }
  return out;
}

CharacterMatrix simulate(const PhyloTree& t, const ModelSpec& model,
                         std::int64_t k, std::uint64_t seed, int threads) {
  if (model.kind == Alphabet::kCfn)
    return simulate_full(t, model, k, seed, threads).leaves;
  if (k < 1) fail("need at least one site");
  auto order = topo_order(t);
  std::vector<std::vector<std::uint8_t>> states(
      t.nodes.size(), std::vector<std::uint8_t>(k, 0));
  for_site_chunks(k, threads, [&](std::int64_t lo, std::int64_t hi) {
    sim_jc_chunk(t, order, k, seed, lo, hi, &states);
  });
  CharacterMatrix out;
  out.alphabet = Alphabet::kJc;
  out.k = k;
  for (int v : t.leaves()) {
    out.leaf_order.push_back(t.nodes[v].label);
    out.jc_rows.push_back(std::move(states[v]));
  }
  return out;
}

// --- Class reduction ----------------------------------------------------------

CharacterMatrix jc_to_cfn_reduce(const CharacterMatrix& m) {
  if (m.alphabet != Alphabet::kJc) fail("class reduction expects ACGT data");
  CharacterMatrix out;
  out.alphabet = Alphabet::kCfn;
  out.k = m.k;
  out.leaf_order = m.leaf_order;
  for (const auto& row : m.jc_rows) {
    PackedSeq seq(m.k);
    for (std::int64_t t = 0; t < m.k; ++t)
      if (row[t] == 0 || row[t] == 2) seq.set_plus(t);  // A or G
    out.cfn_rows.push_back(std::move(seq));
  }
  return out;
}

// --- Text format ----------------------------------------------------------------

std::string write_character_matrix(const CharacterMatrix& m) {
  std::string out = "k=" + std::to_string(m.k) + " alphabet=" +
                    (m.alphabet == Alphabet::kCfn ? "CFN" : "JC") + "\n";
  static const char kJcChar[4] = {'A', 'C', 'G', 'T'};
  for (std::size_t i = 0; i < m.leaf_order.size(); ++i) {
    out += std::to_string(m.leaf_order[i]);
    out += '\t';
    if (m.alphabet == Alphabet::kCfn) {
      const PackedSeq& row = m.cfn_rows[i];
      for (std::int64_t t = 0; t < m.k; ++t)
        out += row.get(t) > 0 ? '+' : '-';
    } else {
      for (std::uint8_t s : m.jc_rows[i]) out += kJcChar[s];
    }
    out += '\n';
  }
  return out;
}

CharacterMatrix read_character_matrix(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) fail("empty character matrix");
  CharacterMatrix m;
  {
    std::istringstream hs(header);
    std::string kpart, apart;
    if (!(hs >> kpart >> apart) || kpart.rfind("k=", 0) != 0 ||
        apart.rfind("alphabet=", 0) != 0)
      fail("bad header: want \"k=<int> alphabet=<CFN|JC>\"");
    auto kres = std::from_chars(kpart.data() + 2, kpart.data() + kpart.size(), m.k);
    if (kres.ec != std::errc() || kres.ptr != kpart.data() + kpart.size())
      fail("bad sequence length in header");
    std::string a = apart.substr(9);
    if (a == "CFN")
      m.alphabet = Alphabet::kCfn;
    else if (a == "JC")
      m.alphabet = Alphabet::kJc;
    else
      fail("unknown alphabet \"" + a + "\"");
    if (m.k < 1) fail("bad sequence length in header");
  }
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail("line " + std::to_string(lineno) + ": missing tab");
    int label = 0;
    auto res = std::from_chars(line.data(), line.data() + tab, label);
    if (res.ec != std::errc() || res.ptr != line.data() + tab || label <= 0)
      fail("line " + std::to_string(lineno) + ": bad leaf label");
    std::string_view seq(line.data() + tab + 1, line.size() - tab - 1);
    if (static_cast<std::int64_t>(seq.size()) != m.k)
      fail("line " + std::to_string(lineno) + ": sequence length mismatch");
    m.leaf_order.push_back(label);
    if (m.alphabet == Alphabet::kCfn) {
      PackedSeq row(m.k);
      for (std::int64_t t = 0; t < m.k; ++t) {
        if (seq[t] == '+')
          row.set_plus(t);
        else if (seq[t] != '-')
          fail("line " + std::to_string(lineno) + ": bad character");
      }
      m.cfn_rows.push_back(std::move(row));
    } else {
      std::vector<std::uint8_t> row(m.k);
      for (std::int64_t t = 0; t < m.k; ++t) {
        switch (seq[t]) {
          case 'A': row[t] = 0; break;
          case 'C': row[t] = 1; break;
          case 'G': row[t] = 2; break;
          case 'T': row[t] = 3; break;
          default:
            fail("line " + std::to_string(lineno) + ": bad character");
        }
      }
      m.jc_rows.push_back(std::move(row));
    }
  }
  if (m.leaf_order.empty()) fail("character matrix has no rows");
  return m;
}

void write_character_matrix_file(const std::string& path,
                                 const CharacterMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path + " for writing");
  out << write_character_matrix(m);
  if (!out) fail("failed writing " + path);
}

CharacterMatrix read_character_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_character_matrix(buf.str());
}

// --- Enumeration oracle ---------------------------------------------------------

double enumerated_pair_correlation(const PhyloTree& t, int u, int v) {
  int n = static_cast<int>(t.nodes.size());
  if (n > 24) fail("enumeration oracle works on small trees only");
  auto order = topo_order(t);
  double total = 0.0;
  for (std::uint32_t config = 0; config < (1u << n); ++config) {
    auto state = [&](int w) { return (config >> w) & 1 ? +1 : -1; };
    double prob = 0.5;
    for (int w : order) {
      if (w == t.root) continue;
      double p = p_of_d(ModelSpec::cfn(), t.nodes[w].length);
      prob *= state(w) != state(t.nodes[w].parent) ? p : 1.0 - p;
    }
    total += prob * state(u) * state(v);
  }
  return total;
}

}  // namespace bcp
