#pragma once

#include <stdexcept>
#include <string>

namespace dmlme {

/// Problems with input data: dimension mismatches, non-finite values,
/// unparsable files, datasets too small for the requested analysis.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failures: singular designs, failed factorizations,
/// optimizer non-convergence.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dmlme
