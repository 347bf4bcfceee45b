#ifndef SGGN_SGGN_HPP
#define SGGN_SGGN_HPP

#include <sggn/assembly.hpp>
#include <sggn/errors.hpp>
#include <sggn/experiment.hpp>
#include <sggn/line_search.hpp>
#include <sggn/linalg.hpp>
#include <sggn/lm.hpp>
#include <sggn/model.hpp>
#include <sggn/optimizer.hpp>
#include <sggn/problem.hpp>
#include <sggn/version.hpp>

#endif  // SGGN_SGGN_HPP
