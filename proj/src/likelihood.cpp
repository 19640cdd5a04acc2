#include "catbn/likelihood.hpp"

#include <limits>

namespace catbn {

LogLikelihood log_likelihood(const JunctionTree& tree, const Dataset& data) {
    const ColumnBinding binding = bind_columns(tree.network(), data);
    LogLikelihood out;
    out.per_row.reserve(data.rows());
    Beliefs scratch;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        double ll;
        try {
            tree.calibrate(binding.evidence_for(data, r), scratch);
            ll = scratch.log_evidence();
        } catch (const ImpossibleEvidence&) {
            ll = -std::numeric_limits<double>::infinity();
            out.impossible_rows.push_back(r);
        }
        out.per_row.push_back(ll);
        out.total += ll;
    }
    return out;
}

LogLikelihood log_likelihood(const Network& net, const Dataset& data) {
    return log_likelihood(JunctionTree(net), data);
}

}  // namespace catbn
