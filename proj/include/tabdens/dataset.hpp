#pragma once

#include "density_model.hpp"
#include "error.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace tabdens {

//! Grouped data: class cut points, class frequencies and, up to order R,
//! the observed class mean and central moments.
//!
//! R = 0 frequencies only, R = 1 adds the means, R = 2 the variances and
//! R = 4 the third and fourth central moments. Classes without observations
//! carry NaN moments and contribute no moment information.
struct GroupedDataset
{
  std::vector<double> class_cuts;
  Eigen::VectorXd freqs;
  ObservedClassMoments observed;
  std::string transform{ "none" }; ///< "none" or "log10"

  int num_classes() const { return static_cast<int>(freqs.size()); }
  int order() const { return observed.order; }
  double n() const { return freqs.sum(); }

  //! Whether class j contributes moment information.
  bool has_moments(int j) const { return order() > 0 && freqs[j] >= 1.0; }
};

inline bool valid_order(int R)
{
  return R == 0 || R == 1 || R == 2 || R == 4;
}

inline void validate(const GroupedDataset& d)
{
  using detail::require;
  const int J = d.num_classes();
  require(J >= 1, "dataset has no classes");
  require(static_cast<int>(d.class_cuts.size()) == J + 1,
          "dataset needs one more cut point than classes");
  for (int j = 1; j <= J; ++j)
    require(d.class_cuts[j] > d.class_cuts[j - 1],
            "class cut points must be strictly increasing");
  require(valid_order(d.order()), "moment order must be 0, 1, 2 or 4");
  for (int j = 0; j < J; ++j) {
    require(d.freqs[j] >= 0.0 && std::floor(d.freqs[j]) == d.freqs[j],
            "class frequencies must be nonnegative integers");
  }
  require(d.n() >= 1.0, "total frequency must be at least 1");
  if (d.order() == 0)
    return;
  require(d.observed.m.rows() == J, "moment table must have one row per class");
  for (int j = 0; j < J; ++j) {
    if (!d.has_moments(j))
      continue;
    for (int r = 0; r < d.order(); ++r)
      require(std::isfinite(d.observed.m(j, r)),
              "missing moment for nonempty class " + std::to_string(j + 1));
    const double mean = d.observed.m(j, 0);
    require(mean > d.class_cuts[j] && mean <= d.class_cuts[j + 1],
            "class mean outside its class interval (class " +
              std::to_string(j + 1) + ")");
    if (d.order() >= 2)
      require(d.observed.m(j, 1) >= 0.0,
              "negative class variance (class " + std::to_string(j + 1) + ")");
  }
}

//! Copy of the dataset restricted to moment order R (R must not exceed the
//! available order).
inline GroupedDataset with_order(const GroupedDataset& d, int R)
{
  detail::require(valid_order(R), "moment order must be 0, 1, 2 or 4");
  detail::require(R <= d.order(),
                  "requested moment order exceeds the available data");
  GroupedDataset out = d;
  out.observed.order = R;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.observed.m.rows() != d.num_classes())
    out.observed.m.setConstant(d.num_classes(), 4, nan);
  for (int r = R; r < 4; ++r)
    out.observed.m.col(r).setConstant(nan);
  return out;
}

} // namespace tabdens
