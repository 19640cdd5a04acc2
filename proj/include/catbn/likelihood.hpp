#ifndef CATBN_LIKELIHOOD_HPP
#define CATBN_LIKELIHOOD_HPP

#include <vector>

#include "catbn/dataset.hpp"
#include "catbn/inference.hpp"

namespace catbn {

struct LogLikelihood {
    double total = 0.0;                    // -inf when any row is impossible
    std::vector<double> per_row;
    std::vector<std::size_t> impossible_rows;

    bool finite() const noexcept { return impossible_rows.empty(); }
};

/// Sum over rows of ln P(observed cells); unobserved variables (including
/// latent skills) are marginalized exactly. Columns the network lacks are
/// ignored.
LogLikelihood log_likelihood(const JunctionTree& tree, const Dataset& data);
LogLikelihood log_likelihood(const Network& net, const Dataset& data);

}  // namespace catbn

#endif
