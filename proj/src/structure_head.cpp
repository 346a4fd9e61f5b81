#include "evokg/structure_head.hpp"

#include <stdexcept>
#include <string>

namespace evokg {

StructureHeadParams StructureHeadParams::glorot(int repr_dim, int num_entities, int num_relations,
                                                std::mt19937_64& rng) {
  StructureHeadParams p;
  p.object = Perceptron::glorot(3 * repr_dim, 3 * repr_dim, num_entities, rng);
  p.relation = Perceptron::glorot(2 * repr_dim, 2 * repr_dim, num_relations, rng);
  p.subject = Perceptron::glorot(repr_dim, repr_dim, num_entities, rng);
  return p;
}

TripleLogProb triple_logprob(const TripleInputs& inputs, std::span<const Quadruple> events,
                             const StructureHeadParams& params, const Dropout* dropout) {
  const auto n = static_cast<ad::Index>(events.size());
  if (inputs.subject.cols() != n || inputs.relation.cols() != n || inputs.summary.cols() != n)
    throw std::invalid_argument("triple_logprob: one input column per event required");
  std::vector<int> s(events.size()), r(events.size()), o(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& q = events[i];
    if (q.subject < 0 || q.subject >= params.num_entities() || q.object < 0 ||
        q.object >= params.num_entities() || q.relation < 0 ||
        q.relation >= params.num_relations())
      throw std::out_of_range("triple_logprob: id out of range in event " + std::to_string(i));
    s[i] = q.subject;
    r[i] = q.relation;
    o[i] = q.object;
  }
  const ad::Var obj_in[] = {inputs.subject, inputs.relation, inputs.summary};
  const ad::Var rel_in[] = {inputs.subject, inputs.summary};
  TripleLogProb out;
  out.object = ad::log_softmax_pick(params.object.forward(ad::vcat(obj_in), dropout), o);
  out.relation = ad::log_softmax_pick(params.relation.forward(ad::vcat(rel_in), dropout), r);
  out.subject = ad::log_softmax_pick(params.subject.forward(inputs.summary, dropout), s);
  return out;
}

ad::Var nll_triple(const TripleInputs& inputs, std::span<const Quadruple> events,
                   const StructureHeadParams& params, const Dropout* dropout) {
  const auto lp = triple_logprob(inputs, events, params, dropout);
  return ad::scale(ad::sum(lp.object + lp.relation + lp.subject), -1.0);
}

Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

Eigen::VectorXd object_log_probs(const Eigen::VectorXd& subject_repr,
                                 const Eigen::VectorXd& relation_repr,
                                 const Eigen::VectorXd& summary, const StructureHeadParams& params) {
  Eigen::VectorXd in(subject_repr.size() + relation_repr.size() + summary.size());
  in << subject_repr, relation_repr, summary;
  return log_softmax(params.object.eval(in)).col(0);
}

Eigen::VectorXd score_objects(const Eigen::VectorXd& object_log_probs,
                              const CandidateTimeTerm* time_term) {
  Eigen::VectorXd scores = object_log_probs;
  if (time_term) {
    if (time_term->contexts.cols() != scores.size() ||
        time_term->taus.size() != static_cast<std::size_t>(scores.size()))
      throw std::invalid_argument("score_objects: one time context per candidate required");
    const auto lt = combined_log_density(time_term->contexts, time_term->taus, *time_term->head);
    for (Eigen::Index k = 0; k < scores.size(); ++k) scores[k] += lt[static_cast<std::size_t>(k)];
  }
  return scores;
}

}  // namespace evokg
