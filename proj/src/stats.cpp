#include "engage/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "engage/csv.hpp"
#include "engage/special.hpp"

namespace engage {

using ordered_json = nlohmann::ordered_json;

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (x.size() != z.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 samples");
    Eigen::VectorXd dx = x.array() - x.mean();
    Eigen::VectorXd dz = z.array() - z.mean();
    double sx = dx.squaredNorm();
    double sz = dz.squaredNorm();
    if (sx <= 0.0 || sz <= 0.0) throw std::invalid_argument("undefined correlation");
    // Sum form keeps the self-correlation exact: S / sqrt(S*S) == 1.
    double r = dx.dot(dz) / std::sqrt(sx * sz);
    return std::clamp(r, -1.0, 1.0);
}

TTest p_value(double r, int n) {
    if (n < 3) throw std::invalid_argument("p_value: need n >= 3");
    if (std::fabs(r) >= 1.0)
        return {r > 0 ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity(),
                0.0};
    double df = static_cast<double>(n - 2);
    double t = r * std::sqrt(df / (1.0 - r * r));
    return {t, student_t_two_tailed(t, df)};
}

SigLevel significance(double p) {
    if (p < 0.01) return SigLevel::p01;
    if (p < 0.05) return SigLevel::p05;
    if (p < 0.1) return SigLevel::p10;
    return SigLevel::none;
}

const char* sig_marker(SigLevel s) {
    switch (s) {
        case SigLevel::p01: return "^1";
        case SigLevel::p05: return "^2";
        case SigLevel::p10: return "^3";
        case SigLevel::none: return "";
    }
    return "";
}

int DataTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

const CorrelationCell& CorrelationMatrix::at(const std::string& row, const std::string& col) const {
    for (std::size_t i = 0; i < row_labels.size(); ++i)
        if (row_labels[i] == row)
            for (std::size_t j = 0; j < col_labels.size(); ++j)
                if (col_labels[j] == col) return cells[i][j];
    throw std::out_of_range("correlation cell (" + row + ", " + col + ") not found");
}

CorrelationMatrix build_matrix(const DataTable& features, const DataTable& indicators,
                               const std::vector<std::string>& prediction_tasks) {
    if (features.ids != indicators.ids)
        throw std::invalid_argument("build_matrix: tables must share the video set");
    if (features.ids.size() < 3)
        throw std::invalid_argument("build_matrix: need at least 3 videos");

    CorrelationMatrix m;
    m.row_labels = indicators.columns;
    m.col_labels = features.columns;
    m.prediction_tasks = prediction_tasks;
    m.cells.assign(m.row_labels.size(), std::vector<CorrelationCell>(m.col_labels.size()));

    const Eigen::Index n_videos = features.values.rows();
    for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
        for (std::size_t j = 0; j < m.col_labels.size(); ++j) {
            // Pairwise-complete: keep videos where both values are finite.
            std::vector<double> xs, zs;
            xs.reserve(n_videos);
            zs.reserve(n_videos);
            for (Eigen::Index v = 0; v < n_videos; ++v) {
                double fx = features.values(v, static_cast<Eigen::Index>(j));
                double ix = indicators.values(v, static_cast<Eigen::Index>(i));
                if (std::isfinite(fx) && std::isfinite(ix)) {
                    xs.push_back(fx);
                    zs.push_back(ix);
                }
            }
            CorrelationCell& cell = m.cells[i][j];
            cell.n = static_cast<int>(xs.size());
            if (cell.n < 3) {
                cell.missing = true;
                continue;
            }
            Eigen::Map<Eigen::VectorXd> xv(xs.data(), static_cast<Eigen::Index>(xs.size()));
            Eigen::Map<Eigen::VectorXd> zv(zs.data(), static_cast<Eigen::Index>(zs.size()));
            try {
                cell.r = pearson(xv, zv);
                auto tt = p_value(cell.r, cell.n);
                cell.p = tt.p;
                cell.sig = significance(cell.p);
            } catch (const std::invalid_argument&) {
                cell.r = 0.0;
                cell.p = 1.0;
                cell.constant_input = true;
            }
        }
    }

    m.mean_row.assign(m.col_labels.size(), 0.0);
    for (std::size_t j = 0; j < m.col_labels.size(); ++j) {
        double sum = 0.0;
        int count = 0;
        for (const auto& task : prediction_tasks) {
            for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
                if (m.row_labels[i] == task && !m.cells[i][j].missing) {
                    sum += m.cells[i][j].r;
                    ++count;
                }
            }
        }
        m.mean_row[j] = count > 0 ? sum / count : 0.0;
    }
    return m;
}

void write_matrix_csv(const CorrelationMatrix& m, const std::filesystem::path& r_path,
                      const std::filesystem::path& p_path) {
    csv::Table rt, pt;
    rt.header.push_back("indicator");
    pt.header.push_back("indicator");
    for (const auto& c : m.col_labels) {
        rt.header.push_back(c);
        pt.header.push_back(c);
    }
    for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
        std::vector<std::string> rr{m.row_labels[i]}, pr{m.row_labels[i]};
        for (std::size_t j = 0; j < m.col_labels.size(); ++j) {
            const auto& cell = m.cells[i][j];
            rr.push_back(cell.missing ? "" : csv::format_double(cell.r));
            pr.push_back(cell.missing ? "" : csv::format_double(cell.p));
        }
        rt.rows.push_back(std::move(rr));
        pt.rows.push_back(std::move(pr));
    }
    std::vector<std::string> mean_row{"mean"};
    for (double v : m.mean_row) mean_row.push_back(csv::format_double(v));
    rt.rows.push_back(std::move(mean_row));
    csv::write_file(r_path, rt);
    csv::write_file(p_path, pt);
}

std::string format_appendix_cell(double r, SigLevel sig) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f%s", r, sig_marker(sig));
    return buf;
}

void write_matrix_tsv(const CorrelationMatrix& m, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + path.string());
    std::fprintf(f, "index");
    for (const auto& c : m.col_labels) std::fprintf(f, "\t%s", c.c_str());
    std::fprintf(f, "\n");
    for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
        std::fprintf(f, "%s", m.row_labels[i].c_str());
        for (std::size_t j = 0; j < m.col_labels.size(); ++j) {
            const auto& cell = m.cells[i][j];
            if (cell.missing)
                std::fprintf(f, "\t-");
            else
                std::fprintf(f, "\t%s", format_appendix_cell(cell.r, cell.sig).c_str());
        }
        std::fprintf(f, "\n");
    }
    std::fprintf(f, "mean");
    for (double v : m.mean_row) std::fprintf(f, "\t%.3f", v);
    std::fprintf(f, "\n");
    std::fclose(f);
}

std::string matrix_to_json(const CorrelationMatrix& m) {
    ordered_json j;
    j["row_labels"] = m.row_labels;
    j["col_labels"] = m.col_labels;
    j["prediction_tasks"] = m.prediction_tasks;
    j["mean_row"] = m.mean_row;
    ordered_json cells = ordered_json::array();
    for (const auto& row : m.cells) {
        ordered_json jrow = ordered_json::array();
        for (const auto& c : row) {
            jrow.push_back({{"r", c.r},
                            {"p", c.p},
                            {"n", c.n},
                            {"sig", static_cast<int>(c.sig)},
                            {"missing", c.missing},
                            {"constant_input", c.constant_input}});
        }
        cells.push_back(std::move(jrow));
    }
    j["cells"] = std::move(cells);
    return j.dump(2);
}

CorrelationMatrix matrix_from_json(const std::string& json_text) {
    auto j = ordered_json::parse(json_text);
    CorrelationMatrix m;
    m.row_labels = j.at("row_labels").get<std::vector<std::string>>();
    m.col_labels = j.at("col_labels").get<std::vector<std::string>>();
    m.prediction_tasks = j.at("prediction_tasks").get<std::vector<std::string>>();
    m.mean_row = j.at("mean_row").get<std::vector<double>>();
    for (const auto& jrow : j.at("cells")) {
        std::vector<CorrelationCell> row;
        for (const auto& jc : jrow) {
            CorrelationCell c;
            c.r = jc.at("r").get<double>();
            c.p = jc.at("p").get<double>();
            c.n = jc.at("n").get<int>();
            c.sig = static_cast<SigLevel>(jc.at("sig").get<int>());
            c.missing = jc.at("missing").get<bool>();
            c.constant_input = jc.at("constant_input").get<bool>();
            row.push_back(c);
        }
        m.cells.push_back(std::move(row));
    }
    return m;
}

} // namespace engage
