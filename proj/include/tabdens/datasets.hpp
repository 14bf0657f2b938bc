#pragma once

#include "dataset.hpp"
#include "density_model.hpp"

namespace tabdens {

//! Motor insurance claim amounts on the log10 scale, n = 3518, in three
//! classes (0, 3], (3, 4.3], (4.3, 6.18] with mean, standard deviation,
//! skewness and excess kurtosis per class.
inline GroupedDataset car_insurance_claims()
{
  GroupedDataset d;
  d.class_cuts = { 0.0, 3.0, 4.3, 6.18 };
  d.freqs = Eigen::Vector3d(1168, 2234, 116);
  d.transform = "log10";
  d.observed.order = 4;
  d.observed.m.resize(3, 4);
  const double s[3][4] = { { 2.462, 0.580, -1.793, 2.401 },
                           { 3.529, 0.336, 0.375, -0.836 },
                           { 4.556, 0.275, 2.603, 9.416 } };
  for (int j = 0; j < 3; ++j) {
    const CentralMoments c = convert_summary_to_central_moments(s[j][0], s[j][1], s[j][2], s[j][3]);
    d.observed.m.row(j) << c.m1, c.m2, c.m3, c.m4;
  }
  return d;
}

} // namespace tabdens
