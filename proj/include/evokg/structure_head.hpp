#pragma once

// p(s, r, o | history) = p(o | s, r) p(r | s) p(s), each a softmax over a
// perceptron of the concatenated structural representations.

#include <Eigen/Dense>

#include <random>
#include <span>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/nn.hpp"
#include "evokg/time_head.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

struct StructureHeadParams {
  Perceptron object;    // [s_bar_s || s_bar_r || g_bar] -> |E|
  Perceptron relation;  // [s_bar_s || g_bar] -> |R|
  Perceptron subject;   // [g_bar] -> |E|

  // repr_dim is the length of a concatenated [dynamic || static] vector.
  static StructureHeadParams glorot(int repr_dim, int num_entities, int num_relations,
                                    std::mt19937_64& rng);
  int num_entities() const { return subject.out_dim(); }
  int num_relations() const { return relation.out_dim(); }
};

// Per-event conditioning, one column per event.
struct TripleInputs {
  ad::Var subject;   // s_bar*_s
  ad::Var relation;  // s_bar*_r
  ad::Var summary;   // g_bar*, broadcast to the event count
};

struct TripleLogProb {
  ad::Var object;    // 1 x n, log p(o | s, r)
  ad::Var relation;  // 1 x n, log p(r | s)
  ad::Var subject;   // 1 x n, log p(s)
};

TripleLogProb triple_logprob(const TripleInputs& inputs, std::span<const Quadruple> events,
                             const StructureHeadParams& params, const Dropout* dropout = nullptr);

// Sum over events of -(log p(o|s,r) + log p(r|s) + log p(s)); 1 x 1.
ad::Var nll_triple(const TripleInputs& inputs, std::span<const Quadruple> events,
                   const StructureHeadParams& params, const Dropout* dropout = nullptr);

// Column-wise log-softmax.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits);

// Value-only log p(o' | s, r) over all candidates for one (s, r) query.
Eigen::VectorXd object_log_probs(const Eigen::VectorXd& subject_repr,
                                 const Eigen::VectorXd& relation_repr,
                                 const Eigen::VectorXd& summary, const StructureHeadParams& params);

// Optional time term for candidate scoring: for candidate o', the combined
// log density of its own inter-event times given context [e_s || e_r || e_o'].
struct CandidateTimeTerm {
  Eigen::MatrixXd contexts;            // 3d x |E|
  std::vector<InterEventTimes> taus;   // |E|
  const TimeHeadParams* head = nullptr;
};

// score[o'] = log p(o' | s, r) (+ time term when given).
Eigen::VectorXd score_objects(const Eigen::VectorXd& object_log_probs,
                              const CandidateTimeTerm* time_term);

}  // namespace evokg
