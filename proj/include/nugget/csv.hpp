#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nugget/core.hpp"

namespace nugget {

// RFC-4180 numeric CSV reader. A first row whose cells do not all parse as
// decimal reals is treated as a header. Quoted fields and CRLF endings are
// accepted.
DataMatrix read_matrix_csv(const std::string& path);

// Writes values with 17 significant digits so round-trips are exact.
void write_matrix_csv(const std::string& path, const Matrix& values,
                      const std::vector<std::string>& header = {});

// Nugget file: nugget_id, center_1..center_P, weight, scale.
void write_nuggets_csv(const std::string& path, const NuggetSet& set);
NuggetSet read_nuggets_csv(const std::string& path);

// Assignment file: row_index, nugget_id.
void write_assignment_csv(const std::string& path, const std::vector<int>& assignment);
std::vector<int> read_assignment_csv(const std::string& path);

// Single-column integer file with header.
void write_labels_csv(const std::string& path, const std::vector<int>& labels,
                      const std::string& name = "label");
std::vector<int> read_labels_csv(const std::string& path);

std::string format_double(double v);  // %.17g

}  // namespace nugget
