/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/log_math.h
 * \brief Natural-log domain helpers.
 */
#ifndef CDTAX_LOG_MATH_H_
#define CDTAX_LOG_MATH_H_

#include <cmath>
#include <limits>
#include <span>

namespace cdtax {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/*! \brief Stable log(sum(exp(x))). Returns -inf for an empty span or an all -inf span. */
double LogSumExp(std::span<const double> values);

/*! \brief log(exp(a) + exp(b)). */
double LogAddExp(double a, double b);

/*! \brief log(1 - exp(x)) for x <= 0, accurate near both ends. */
double Log1mExp(double x);

}  // namespace cdtax

#endif  // CDTAX_LOG_MATH_H_
