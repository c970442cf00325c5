// SPDX-License-Identifier: Apache-2.0
// Builds simulated environments and matching search configs for tests.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "chemamp/amplifier.hpp"
#include "chemamp/harness.hpp"

namespace testing_support {

struct Sim {
  chemamp::SimEnv env;
  std::shared_ptr<chemamp::ToolRegistry> registry;
  std::vector<std::string> tool_ids;
};

inline Sim make_sim(const chemamp::SimEnvSpec& spec) {
  Sim sim;
  sim.env = chemamp::gen_simenv(spec);
  sim.registry = chemamp::make_registry(sim.env.tools,
                                        chemamp::environment_from(sim.env.dataset, spec.alphabet));
  for (const auto& d : sim.env.tools) sim.tool_ids.push_back(d.tool_id);
  return sim;
}

// Property-style environment: one uppercase letter per answer, scored by accuracy.
inline chemamp::SimEnvSpec accuracy_spec(int n, std::vector<double> ps, std::uint64_t seed) {
  chemamp::SimEnvSpec spec;
  spec.n_instances = n;
  spec.alphabet = "ABCDEFGHIJKLMNOP";
  spec.answer_length = 1;
  spec.task_kind = chemamp::TaskKind::kPropertyPrediction;
  spec.seed = seed;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    spec.tools.push_back({std::string(1, static_cast<char>('A' + i)) + "Tool", ps[i],
                          chemamp::Perturber::kSubstitute});
  }
  return spec;
}

inline chemamp::SearchConfig search_for(const chemamp::SimEnvSpec& spec, chemamp::MetricId metric,
                                        std::uint64_t seed, unsigned threads = 1) {
  chemamp::SearchConfig config;
  config.fitness_metric = metric;
  config.seed = seed;
  config.threads = threads;
  config.policy.q = spec.q;
  config.policy.m = spec.m;
  config.policy.r = spec.r;
  config.policy.task = spec.task_kind;
  config.m_decay = spec.m_decay;
  return config;
}

}  // namespace testing_support
