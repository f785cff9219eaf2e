#pragma once

// Discrete-architecture derivation (argmax over architecture weights, ties
// broken toward the lowest index), the exported architecture document, and
// the collapsed single-candidate spec used to rebuild a chosen architecture
// from scratch for retraining.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/search/supernet.hpp"

namespace sernas::search {

template <typename T>
DiscreteArch derive_architecture(Supernet<T>& net) {
  DiscreteArch arch;
  arch.provenance = DiscreteArch::Provenance::argmax;
  for (auto& mv : net.mixed_views()) {
    std::vector<double> logits(mv.alpha->value.begin(), mv.alpha->value.end());
    auto w = arch_softmax(logits);
    int best = 0;
    for (int i = 1; i < static_cast<int>(w.size()); ++i)
      if (w[i] > w[best]) best = i;
    arch.choice.push_back(best);
    arch.layer_ids.push_back(mv.id);
    arch.op_names.push_back(mv.cands[best].str());
  }
  arch.param_count = net.count_params_discrete(arch.choice);
  return arch;
}

template <typename T>
DiscreteArch random_architecture(Supernet<T>& net, RngStream& rng) {
  DiscreteArch arch;
  arch.provenance = DiscreteArch::Provenance::random;
  for (auto& mv : net.mixed_views()) {
    const int pickd = rng.uniform_int(mv.n());
    arch.choice.push_back(pickd);
    arch.layer_ids.push_back(mv.id);
    arch.op_names.push_back(mv.cands[pickd].str());
  }
  arch.param_count = net.count_params_discrete(arch.choice);
  return arch;
}

// A path mask that pins the mask to one discrete architecture; evaluating the
// supernet in sample mode with it is exactly the candidate network's forward
// pass (no architecture weights applied).
template <typename T>
PathMask arch_mask(Supernet<T>& net, const DiscreteArch& arch) {
  auto sizes = net.mixed_sizes();
  if (arch.choice.size() != sizes.size())
    throw std::invalid_argument("arch_mask: layer count mismatch");
  PathMask m;
  m.mode = PathMask::Mode::sample;
  for (size_t l = 0; l < sizes.size(); ++l) {
    std::vector<uint8_t> keep(sizes[l], 0);
    keep.at(arch.choice[l]) = 1;
    m.keep.push_back(std::move(keep));
    m.layer_scale.push_back(1.0);
  }
  m.validate(sizes);
  return m;
}

// Collapses every mixed layer of a spec to the chosen candidate. Rebuilding a
// supernet from the result yields the discrete network (fresh parameters).
template <typename T>
SearchSpaceSpec collapse_spec(Supernet<T>& net, const DiscreteArch& arch) {
  SearchSpaceSpec s = net.spec;
  auto views = net.mixed_views();
  if (arch.choice.size() != views.size())
    throw std::invalid_argument("collapse_spec: layer count mismatch");
  size_t vi = 0;
  auto kernel_of = [&](size_t v) {
    const auto& c = views[v].cands[arch.choice[v]];
    return std::pair<int, int>{c.kh, c.kw};
  };
  if (net.has_pair) {
    s.pair_crop = {net.pair_a.max_kh, net.pair_a.max_kw};
    s.pair_b_crop = {net.pair_b.max_kh, net.pair_b.max_kw};
    if (s.tied_conv_pair) {
      s.pair_kernels = {kernel_of(vi)};
      s.pair_kernels_b.clear();
      ++vi;
    } else {
      const auto& cb = views[1].cands[arch.choice[1]];
      s.pair_kernels = {kernel_of(0)};
      s.pair_kernels_b = {{cb.kw, cb.kh}};  // undo the build-time transposition
      vi += 2;
    }
  }
  if (s.family != Family::custom) {
    auto* c3 = &net.stages[1].conv;  // stages: conv3, pool, conv4, pool, pool
    auto* c4 = &net.stages[1].conv;
    size_t ci = 0;
    for (auto& st : net.stages)
      if (!st.is_pool) (ci++ == 0 ? c3 : c4) = &st.conv;
    s.conv3_crop = {c3->max_kh, c3->max_kw};
    s.conv4_crop = {c4->max_kh, c4->max_kw};
    s.conv3_kernels = {kernel_of(vi)};
    ++vi;
    s.conv4_kernels = {kernel_of(vi)};
    ++vi;
    s.head_widths = {views[vi].cands[arch.choice[vi]].width};
  } else {
    size_t si = 0;
    for (auto& cs : s.custom_stages) {
      if (cs.is_pool) continue;
      while (net.stages[si].is_pool) ++si;
      cs.crop = {net.stages[si].conv.max_kh, net.stages[si].conv.max_kw};
      ++si;
      cs.kernels = {kernel_of(vi)};
      ++vi;
    }
  }
  return s;
}

// ---- architecture document -------------------------------------------------

inline std::string arch_to_text(const DiscreteArch& arch) {
  std::ostringstream os;
  os << "# derived architecture\n";
  os << "provenance "
     << (arch.provenance == DiscreteArch::Provenance::argmax ? "argmax" : "random")
     << "\n";
  for (size_t i = 0; i < arch.choice.size(); ++i)
    os << "layer " << arch.layer_ids[i] << " choice=" << arch.choice[i]
       << " op=" << arch.op_names[i] << "\n";
  os << "params " << arch.param_count << "\n";
  return os.str();
}

inline void write_arch(const DiscreteArch& arch, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << arch_to_text(arch);
}

inline DiscreteArch parse_arch_text(const std::string& text) {
  DiscreteArch arch;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "provenance") {
      std::string p;
      ls >> p;
      arch.provenance = p == "random" ? DiscreteArch::Provenance::random
                                      : DiscreteArch::Provenance::argmax;
    } else if (tag == "layer") {
      std::string id, choice_kv, op_kv;
      ls >> id >> choice_kv >> op_kv;
      if (choice_kv.rfind("choice=", 0) != 0 || op_kv.rfind("op=", 0) != 0)
        throw std::runtime_error("malformed architecture line: " + line);
      arch.layer_ids.push_back(id);
      arch.choice.push_back(std::stoi(choice_kv.substr(7)));
      arch.op_names.push_back(op_kv.substr(3));
    } else if (tag == "params") {
      long long n = 0;
      ls >> n;
      arch.param_count = n;
    }
  }
  if (arch.choice.empty())
    throw std::runtime_error("architecture document has no layers");
  return arch;
}

inline DiscreteArch read_arch(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_arch_text(ss.str());
}

}  // namespace sernas::search
