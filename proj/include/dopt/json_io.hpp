#pragma once

#include <string>

#include "dopt/branch_bound.hpp"
#include "dopt/local_search.hpp"
#include "dopt/model.hpp"
#include "dopt/relaxation.hpp"

namespace dopt {

// All writers emit a fixed layout with doubles printed at 17 significant
// digits, so identical inputs give identical bytes and every double
// round-trips exactly. Parsing is strict: wrong shapes throw
// std::invalid_argument.

std::string write_design(const ModelSpec& spec, const Design& design,
                         Scalar ldet);
std::string write_certificate(const DualCertificate& cert);
std::string write_search_report(const ModelSpec& spec, const SearchResult& result);
std::string write_bound_report(const ModelSpec& spec, const BoundReport& report);
std::string write_solve_report(const ModelSpec& spec, const BnbResult& result);

struct DesignDocument {
  ModelSpec model;
  Design design;
  Scalar ldet = 0;
};

DesignDocument read_design(const std::string& text);
DualCertificate read_certificate(const std::string& text);

}  // namespace dopt
