#include "nugget/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nugget {

namespace {

// One RFC-4180 record: comma-separated, fields may be quoted ("" escapes a
// quote). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    if (fields.size() == 1 && fields[0].empty() && in.peek() == EOF) return false;
    return true;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) return false;
    *out = v;
    return true;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open for reading: " + path);
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

DataMatrix read_matrix_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> fields;
    long cols = -1;
    bool first = true;
    while (read_record(in, fields)) {
        std::vector<double> row(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (!parse_double(fields[i], &row[i])) {
                numeric = false;
                break;
            }
        if (first) {
            first = false;
            if (!numeric) continue;  // header row
        }
        if (!numeric)
            throw ValidationError(path + ": non-numeric cell in data row " +
                                  std::to_string(rows.size() + 1));
        if (cols < 0) cols = static_cast<long>(row.size());
        if (static_cast<long>(row.size()) != cols)
            throw ValidationError(path + ": ragged row " + std::to_string(rows.size() + 1));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": no data rows");

    DataMatrix X;
    X.values.resize(static_cast<long>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (long j = 0; j < cols; ++j) X.values(static_cast<long>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return X;
}

void write_matrix_csv(const std::string& path, const Matrix& values,
                      const std::vector<std::string>& header) {
    std::ofstream out = open_out(path);
    if (!header.empty()) {
        if (static_cast<long>(header.size()) != values.cols())
            throw ValidationError("write_matrix_csv: header width mismatch");
        for (std::size_t i = 0; i < header.size(); ++i)
            out << (i ? "," : "") << header[i];
        out << "\n";
    }
    for (long i = 0; i < values.rows(); ++i) {
        for (long j = 0; j < values.cols(); ++j)
            out << (j ? "," : "") << format_double(values(i, j));
        out << "\n";
    }
    if (!out) throw ValidationError("write failed: " + path);
}

void write_nuggets_csv(const std::string& path, const NuggetSet& set) {
    std::ofstream out = open_out(path);
    out << "nugget_id";
    for (long p = 0; p < set.dim; ++p) out << ",center_" << (p + 1);
    out << ",weight,scale\n";
    for (long j = 0; j < set.size(); ++j) {
        const auto& n = set.nuggets[static_cast<std::size_t>(j)];
        out << j;
        for (long p = 0; p < set.dim; ++p) out << "," << format_double(n.center(p));
        out << "," << n.weight << "," << format_double(n.scale) << "\n";
    }
    if (!out) throw ValidationError("write failed: " + path);
}

NuggetSet read_nuggets_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::string> fields;
    if (!read_record(in, fields) || fields.size() < 4 || fields.front() != "nugget_id")
        throw ValidationError(path + ": not a nugget file");
    const long P = static_cast<long>(fields.size()) - 3;

    NuggetSet set;
    set.dim = P;
    while (read_record(in, fields)) {
        if (static_cast<long>(fields.size()) != P + 3)
            throw ValidationError(path + ": ragged nugget row");
        DataNugget n;
        n.center.resize(P);
        double v = 0;
        for (long p = 0; p < P; ++p) {
            if (!parse_double(fields[static_cast<std::size_t>(p + 1)], &v))
                throw ValidationError(path + ": bad center value");
            n.center(p) = v;
        }
        if (!parse_double(fields[static_cast<std::size_t>(P + 1)], &v) || v < 1)
            throw ValidationError(path + ": bad weight");
        n.weight = static_cast<long>(v);
        if (!parse_double(fields[static_cast<std::size_t>(P + 2)], &v) || v < 0)
            throw ValidationError(path + ": bad scale");
        n.scale = v;
        set.nuggets.push_back(std::move(n));
    }
    if (set.nuggets.empty()) throw ValidationError(path + ": no nuggets");
    return set;
}

void write_assignment_csv(const std::string& path, const std::vector<int>& assignment) {
    std::ofstream out = open_out(path);
    out << "row_index,nugget_id\n";
    for (std::size_t i = 0; i < assignment.size(); ++i)
        out << i << "," << assignment[i] << "\n";
    if (!out) throw ValidationError("write failed: " + path);
}

std::vector<int> read_assignment_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::string> fields;
    if (!read_record(in, fields) || fields.size() != 2 || fields.front() != "row_index")
        throw ValidationError(path + ": not an assignment file");
    std::vector<int> assignment;
    while (read_record(in, fields)) {
        if (fields.size() != 2) throw ValidationError(path + ": ragged assignment row");
        double idx = 0, id = 0;
        if (!parse_double(fields[0], &idx) || !parse_double(fields[1], &id))
            throw ValidationError(path + ": bad assignment row");
        if (static_cast<std::size_t>(idx) != assignment.size())
            throw ValidationError(path + ": row_index out of order");
        assignment.push_back(static_cast<int>(id));
    }
    return assignment;
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels,
                      const std::string& name) {
    std::ofstream out = open_out(path);
    out << name << "\n";
    for (int v : labels) out << v << "\n";
    if (!out) throw ValidationError("write failed: " + path);
}

std::vector<int> read_labels_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::string> fields;
    std::vector<int> labels;
    bool first = true;
    while (read_record(in, fields)) {
        if (fields.size() != 1) throw ValidationError(path + ": expected one column");
        double v = 0;
        if (!parse_double(fields[0], &v)) {
            if (first) {
                first = false;
                continue;
            }
            throw ValidationError(path + ": non-numeric label");
        }
        first = false;
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

}  // namespace nugget
