#include "specopt/io.hpp"

namespace specopt
{

nlohmann::json basis_to_json(const SpectralBasis& basis)
{
    nlohmann::json values = nlohmann::json::array();
    nlohmann::json vectors = nlohmann::json::array();
    for (Index k = 0; k < basis.size(); ++k)
    {
        values.push_back(basis.eigenvalues(k));
        nlohmann::json column = nlohmann::json::array();
        for (Index i = 0; i < basis.size(); ++i)
            column.push_back(basis.eigenvectors(i, k));
        vectors.push_back(std::move(column));
    }
    return {{"eigenvalues", std::move(values)}, {"eigenvectors", std::move(vectors)}};
}

} // namespace specopt
