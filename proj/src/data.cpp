#include "catbn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "catbn/random.hpp"

namespace catbn {

std::vector<Column> dataset_schema(const TestBlueprint& bp, Scale scale) {
    std::vector<Column> cols;
    for (const auto& y : bp.info_vars) cols.push_back({y.id, ColumnKind::info, y.cardinality, 0});
    for (const auto& q : bp.questions) {
        const int card = scale == Scale::boolean ? 2 : q.max_points + 1;
        cols.push_back({q.id, ColumnKind::question, card, q.max_points});
    }
    return cols;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

Dataset read_csv(std::istream& in, const TestBlueprint& bp, Scale scale) {
    Dataset ds;
    ds.scale = scale;
    ds.columns = dataset_schema(bp, scale);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty csv: header required");
    const auto header = split_line(strip_cr(line));
    std::vector<std::string> expected{"student_id"};
    for (const auto& c : ds.columns) expected.push_back(c.id);
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw ParseError("csv header does not match the blueprint schema; expected: " + want);
    }

    std::set<std::string> seen;
    std::vector<int> values(ds.cols());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != expected.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected.size()) +
                             " fields, got " + std::to_string(cells.size()));
        const std::string& sid = cells[0];
        if (sid.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty student_id");
        if (!seen.insert(sid).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate student id '" + sid + "'");
        for (std::size_t c = 0; c < ds.cols(); ++c) {
            const std::string& text = cells[c + 1];
            const Column& col = ds.columns[c];
            if (text.empty()) {
                values[c] = kMissing;
                continue;
            }
            int x = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
            if (ec != std::errc{} || ptr != text.data() + text.size())
                throw ParseError("line " + std::to_string(line_no) + ", column '" + col.id + "': '" + text +
                                 "' is not an integer");
            // Info cells are 1-based on disk.
            const int state = col.kind == ColumnKind::info ? x - 1 : x;
            if (state < 0 || state >= col.cardinality) {
                const int lo = col.kind == ColumnKind::info ? 1 : 0;
                const int hi = col.kind == ColumnKind::info ? col.cardinality : col.cardinality - 1;
                throw ParseError("line " + std::to_string(line_no) + ", column '" + col.id + "': value " +
                                 text + " outside [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
            }
            values[c] = state;
        }
        ds.add_row(sid, values);
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, const TestBlueprint& bp, Scale scale) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    try {
        return read_csv(in, bp, scale);
    } catch (const ParseError& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
}

void write_csv(const Dataset& ds, std::ostream& out) {
    out << "student_id";
    for (const auto& c : ds.columns) out << ',' << c.id;
    out << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        out << ds.student_ids[r];
        for (std::size_t c = 0; c < ds.cols(); ++c) {
            out << ',';
            const int x = ds.at(r, c);
            if (x == kMissing) continue;
            out << (ds.columns[c].kind == ColumnKind::question ? x : x + 1);
        }
        out << '\n';
    }
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_csv(ds, out);
    if (!out) throw Error("write failed for " + path.string());
}

std::uint64_t dataset_hash(const Dataset& ds) {
    std::ostringstream ss;
    write_csv(ds, ss);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : ss.str()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

Dataset to_boolean(const Dataset& ds) {
    if (ds.scale == Scale::boolean) throw InvalidArgument("dataset is already on the Boolean scale");
    Dataset out = ds;
    out.scale = Scale::boolean;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        Column& col = out.columns[c];
        if (col.kind != ColumnKind::question) continue;
        col.cardinality = 2;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            const int x = ds.at(r, c);
            out.at(r, c) = x == kMissing ? kMissing : (x == col.max_points ? 1 : 0);
        }
    }
    return out;
}

ScoreGroups discretize_scores(const Dataset& ds) {
    const std::size_t n = ds.rows();
    if (n < 3) throw InvalidArgument("score groups need at least 3 rows, got " + std::to_string(n));
    ScoreGroups g;
    std::vector<int> totals(n);
    for (std::size_t r = 0; r < n; ++r) {
        totals[r] = ds.total_score(r);
        if (ds.has_missing_answers(r)) ++g.partial_rows;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (totals[a] != totals[b]) return totals[a] < totals[b];
        return ds.student_ids[a] < ds.student_ids[b];
    });
    const std::size_t first = (n + 2) / 3;
    const std::size_t second = (n - first + 1) / 2;
    g.sizes = {first, second, n - first - second};
    g.group.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) g.group[order[k]] = k < first ? 0 : (k < first + second ? 1 : 2);
    return g;
}

Dataset with_score_column(const Dataset& ds, const ScoreGroups& groups, const std::string& column_id) {
    if (groups.group.size() != ds.rows()) throw InvalidArgument("score groups do not match the dataset rows");
    if (ds.column_index(column_id)) throw InvalidArgument("dataset already has a column '" + column_id + "'");
    Dataset out;
    out.scale = ds.scale;
    out.columns = ds.columns;
    out.columns.push_back({column_id, ColumnKind::score, kScoreGroups, 0});
    out.student_ids = ds.student_ids;
    out.cells.reserve(ds.rows() * out.cols());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        auto row = ds.row(r);
        out.cells.insert(out.cells.end(), row.begin(), row.end());
        out.cells.push_back(groups.group[r]);
    }
    return out;
}

SyntheticData generate_synthetic(const Network& truth, const TestBlueprint& bp, std::size_t n,
                                 std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("synthetic dataset needs n >= 1");
    require_valid(truth);
    validate_blueprint(bp);

    std::optional<Scale> scale;
    for (const auto& q : bp.questions) {
        const VarIndex v = truth.index_of(q.id);
        const Variable& var = truth.variable(v);
        const Scale s = var.scale.value_or(var.cardinality == 2 && q.max_points != 1 ? Scale::boolean
                                                                                     : Scale::points);
        if (scale && *scale != s) throw InvalidArgument("truth network mixes question scales");
        scale = s;
    }

    SyntheticData syn;
    syn.data.scale = *scale;
    syn.data.columns = dataset_schema(bp, *scale);
    const ColumnBinding binding = bind_columns(truth, syn.data);
    for (std::size_t c = 0; c < syn.data.cols(); ++c)
        if (syn.data.columns[c].kind == ColumnKind::question && binding.var_of_column[c] == kNoVar)
            throw InvalidArgument("truth network lacks question '" + syn.data.columns[c].id + "'");

    const auto skills = truth.targets();
    for (VarIndex s : skills) syn.skill_ids.push_back(truth.variable(s).id);

    const auto order = truth.topological_order();
    Rng rng(seed);
    std::vector<int> assignment(truth.size(), 0);
    std::vector<int> values(syn.data.cols());
    const int width = static_cast<int>(std::to_string(n).size());
    for (std::size_t r = 0; r < n; ++r) {
        for (VarIndex v : order) {
            const Cpt& cpt = truth.cpt(v);
            const auto card = static_cast<std::size_t>(truth.cardinality(v));
            const std::size_t row = truth.row_index(v, assignment);
            assignment[v] = sample_categorical(rng, std::span(cpt.table).subspan(row * card, card));
        }
        for (std::size_t c = 0; c < values.size(); ++c)
            values[c] = binding.var_of_column[c] == kNoVar ? kMissing : assignment[binding.var_of_column[c]];
        std::string id = std::to_string(r + 1);
        id = "s" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
        syn.data.add_row(std::move(id), values);
        for (VarIndex s : skills) syn.skills.push_back(assignment[s]);
    }
    return syn;
}

void save_truth_skills(const SyntheticData& syn, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "student_id";
    for (const auto& s : syn.skill_ids) out << ',' << s;
    out << '\n';
    const std::size_t k = syn.skill_ids.size();
    for (std::size_t r = 0; r < syn.data.rows(); ++r) {
        out << syn.data.student_ids[r];
        for (std::size_t j = 0; j < k; ++j) out << ',' << syn.skills[r * k + j] + 1;
        out << '\n';
    }
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Network make_ground_truth(const TestBlueprint& bp, const GroundTruthOptions& opt) {
    validate_blueprint(bp);
    if (opt.skill_states < 2) throw InvalidArgument("ground truth needs at least 2 skill states");
    Rng rng(opt.seed);
    Network net;
    const int k = opt.skill_states;
    Variable s;
    s.id = kSingleSkillId;
    s.name = "skill";
    s.cardinality = k;
    s.role = Role::skill;
    const VarIndex skill = net.add_variable(std::move(s));
    {
        // Mildly peaked prior so no level is rare.
        std::vector<double> prior(static_cast<std::size_t>(k));
        double total = 0.0;
        for (int l = 0; l < k; ++l) {
            const double mid = (k - 1) / 2.0;
            prior[l] = 1.0 + 0.3 * (1.0 - std::abs(l - mid) / std::max(mid, 1.0));
            total += prior[l];
        }
        for (double& p : prior) p /= total;
        net.set_table(skill, prior);
    }
    auto ability = [&](int level) { return -1.5 + 3.0 * level / (k - 1); };

    for (const auto& q : bp.questions) {
        Variable x;
        x.id = q.id;
        x.role = Role::question;
        x.scale = opt.scale;
        x.cardinality = opt.scale == Scale::boolean ? 2 : q.max_points + 1;
        for (int p = 0; p < x.cardinality; ++p) x.states.push_back(std::to_string(p));
        const VarIndex v = net.add_variable(std::move(x));
        net.set_parents(v, {skill});
        const double difficulty = uniform(rng, -opt.difficulty_spread, opt.difficulty_spread);
        const double discrimination = uniform(rng, opt.min_discrimination, opt.max_discrimination);
        const int card = net.cardinality(v);
        std::vector<double> table;
        for (int l = 0; l < k; ++l) {
            const double f = logistic(discrimination * (ability(l) - difficulty));
            if (opt.scale == Scale::boolean) {
                table.push_back(1.0 - f);
                table.push_back(f);
            } else {
                // Binomial(max_points, f) over the points obtained.
                const int m = card - 1;
                for (int p = 0; p <= m; ++p)
                    table.push_back(std::exp(std::lgamma(m + 1.0) - std::lgamma(p + 1.0) - std::lgamma(m - p + 1.0)) *
                                    std::pow(f, p) * std::pow(1.0 - f, m - p));
            }
        }
        net.set_table(v, std::move(table));
    }

    if (opt.with_info) {
        for (const auto& y : bp.info_vars) {
            Variable info;
            info.id = y.id;
            info.role = Role::info;
            info.cardinality = y.cardinality;
            const VarIndex v = net.add_variable(std::move(info));
            net.set_parents(v, {skill});
            const bool grade = y.cardinality == 5;
            std::vector<double> table;
            for (int l = 0; l < k; ++l) {
                std::vector<double> row(static_cast<std::size_t>(y.cardinality));
                double total = 0.0;
                for (int g = 0; g < y.cardinality; ++g) {
                    if (grade) {
                        // Grade 1 (state 0) is best; mean moves from 4.8 down to 1.2.
                        const double mean = 3.0 - 1.2 * ability(l);
                        const double d = (g + 1) - mean;
                        row[g] = std::exp(-d * d / (2 * 0.8 * 0.8));
                    } else {
                        row[g] = 1.0;
                    }
                    total += row[g];
                }
                for (double x : row) table.push_back(x / total);
            }
            net.set_table(v, std::move(table));
        }
    }
    return net;
}

std::map<std::string, std::optional<double>> grade_correlations(const Dataset& ds,
                                                                const std::vector<std::string>& subjects) {
    std::map<std::string, std::optional<double>> out;
    for (const auto& subject : subjects) {
        auto c = ds.column_index(subject);
        if (!c) throw InvalidArgument("dataset has no grade column '" + subject + "'");
        std::vector<double> xs, ys;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            const int g = ds.at(r, *c);
            if (g == kMissing) continue;
            xs.push_back(g + 1.0);
            ys.push_back(ds.total_score(r));
        }
        const double n = static_cast<double>(xs.size());
        if (xs.size() < 2) {
            out[subject] = std::nullopt;
            continue;
        }
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        if (sxx == 0.0 || syy == 0.0)
            out[subject] = std::nullopt;
        else
            out[subject] = sxy / std::sqrt(sxx * syy);
    }
    return out;
}

}  // namespace catbn
