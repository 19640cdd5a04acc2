#ifndef CATBN_DATASET_HPP
#define CATBN_DATASET_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catbn/network.hpp"

namespace catbn {

inline constexpr int kMissing = -1;

enum class ColumnKind { question, info, score };

struct Column {
    std::string id;
    ColumnKind kind = ColumnKind::question;
    int cardinality = 2;  // question: max_points + 1 (points) or 2 (boolean)
    int max_points = 1;   // questions only
};

/// Student records. Cells hold 0-based state indices; for questions the
/// state index equals the points obtained. kMissing marks an empty cell.
struct Dataset {
    Scale scale = Scale::points;
    std::vector<Column> columns;
    std::vector<std::string> student_ids;
    std::vector<int> cells;  // row-major

    std::size_t rows() const noexcept { return student_ids.size(); }
    std::size_t cols() const noexcept { return columns.size(); }
    int at(std::size_t r, std::size_t c) const { return cells[r * columns.size() + c]; }
    int& at(std::size_t r, std::size_t c) { return cells[r * columns.size() + c]; }
    std::span<const int> row(std::size_t r) const {
        return {cells.data() + r * columns.size(), columns.size()};
    }

    std::optional<std::size_t> column_index(std::string_view id) const;
    std::vector<std::size_t> columns_of_kind(ColumnKind kind) const;

    /// Sum of answered question cells.
    int total_score(std::size_t r) const;
    bool has_missing_answers(std::size_t r) const;

    void add_row(std::string student_id, std::span<const int> values);
    Dataset select_rows(std::span<const std::size_t> rows) const;
    /// Drops every column not listed, keeping the listed order.
    Dataset select_columns(std::span<const std::size_t> cols) const;
};

/// Column -> network variable mapping (kNoVar for columns the net lacks).
struct ColumnBinding {
    std::vector<VarIndex> var_of_column;

    Evidence evidence_for(const Dataset& ds, std::size_t row) const;
};

/// Binds by id equality. Throws InvalidArgument when a bound column's
/// cardinality disagrees with its variable.
ColumnBinding bind_columns(const Network& net, const Dataset& ds);

}  // namespace catbn

#endif
