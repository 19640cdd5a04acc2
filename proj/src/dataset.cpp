#include "catbn/dataset.hpp"

#include <algorithm>

namespace catbn {

std::optional<std::size_t> Dataset::column_index(std::string_view id) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].id == id) return c;
    return std::nullopt;
}

std::vector<std::size_t> Dataset::columns_of_kind(ColumnKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].kind == kind) out.push_back(c);
    return out;
}

int Dataset::total_score(std::size_t r) const {
    int total = 0;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].kind == ColumnKind::question && at(r, c) != kMissing) total += at(r, c);
    return total;
}

bool Dataset::has_missing_answers(std::size_t r) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].kind == ColumnKind::question && at(r, c) == kMissing) return true;
    return false;
}

void Dataset::add_row(std::string student_id, std::span<const int> values) {
    if (values.size() != columns.size()) throw InvalidArgument("row width differs from column count");
    student_ids.push_back(std::move(student_id));
    cells.insert(cells.end(), values.begin(), values.end());
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    Dataset out;
    out.scale = scale;
    out.columns = columns;
    out.student_ids.reserve(rows.size());
    out.cells.reserve(rows.size() * columns.size());
    for (std::size_t r : rows) out.add_row(student_ids.at(r), row(r));
    return out;
}

Dataset Dataset::select_columns(std::span<const std::size_t> cols) const {
    Dataset out;
    out.scale = scale;
    out.student_ids = student_ids;
    for (std::size_t c : cols) out.columns.push_back(columns.at(c));
    out.cells.reserve(rows() * cols.size());
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t c : cols) out.cells.push_back(at(r, c));
    return out;
}

Evidence ColumnBinding::evidence_for(const Dataset& ds, std::size_t row) const {
    Evidence e;
    for (std::size_t c = 0; c < var_of_column.size(); ++c) {
        const int x = ds.at(row, c);
        if (var_of_column[c] != kNoVar && x != kMissing) e.set(var_of_column[c], x);
    }
    return e;
}

ColumnBinding bind_columns(const Network& net, const Dataset& ds) {
    ColumnBinding b;
    b.var_of_column.assign(ds.cols(), kNoVar);
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        auto v = net.find(ds.columns[c].id);
        if (!v) continue;
        if (net.cardinality(*v) != ds.columns[c].cardinality)
            throw InvalidArgument("column '" + ds.columns[c].id + "' has cardinality " +
                                  std::to_string(ds.columns[c].cardinality) + " but the network variable has " +
                                  std::to_string(net.cardinality(*v)));
        b.var_of_column[c] = *v;
    }
    return b;
}

}  // namespace catbn
