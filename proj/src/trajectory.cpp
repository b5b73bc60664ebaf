#include "dln/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace dln {

namespace {

// Shortest decimal that round-trips to the same double (<= 17 digits).
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

double parse_double(std::string_view field, std::size_t line) {
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw FormatError("cannot parse number '" + std::string(field) + "'", line);
    }
    return value;
}

std::optional<double> parse_optional(std::string_view field, std::size_t line) {
    if (field.empty()) {
        return std::nullopt;
    }
    return parse_double(field, line);
}

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

const char* phase_label(Phase p) {
    return p == Phase::optimization ? "optimization" : "regularization";
}

} // namespace

void write_trajectory_csv(std::span<const TrajectoryRecord> records,
                          const std::filesystem::path& path) {
    if (records.empty()) {
        throw Error("refusing to write an empty trajectory");
    }
    const std::size_t d = records.front().w.size();
    for (const auto& rec : records) {
        if (rec.w.size() != d) {
            throw Error("trajectory records disagree on d");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << "step,t";
    for (std::size_t i = 1; i <= d; ++i) {
        out << ",w_" << i;
    }
    out << ",W,loss,imbalance,lr,band_lo,band_hi,eta,phase\n";
    for (const auto& rec : records) {
        out << rec.step << ',' << format_optional(rec.t);
        for (double v : rec.w) {
            out << ',' << format_double(v);
        }
        out << ',' << format_double(rec.W)
            << ',' << format_double(rec.loss)
            << ',' << format_double(rec.imbalance)
            << ',' << format_double(rec.lr)
            << ',' << format_optional(rec.band_lo)
            << ',' << format_optional(rec.band_hi)
            << ',' << format_optional(rec.eta)
            << ',' << (rec.phase ? phase_label(*rec.phase) : "")
            << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("missing header", 0);
    }
    const auto header = split_line(line);
    if (header.size() < 11 || header[0] != "step" || header[1] != "t") {
        throw FormatError("unrecognized header", 1);
    }
    const std::size_t d = header.size() - 10;
    for (std::size_t i = 0; i < d; ++i) {
        const std::string expect = "w_" + std::to_string(i + 1);
        if (header[2 + i] != expect) {
            throw FormatError("expected column '" + expect + "'", 1);
        }
    }
    const char* tail[] = {"W", "loss", "imbalance", "lr", "band_lo", "band_hi", "eta", "phase"};
    for (std::size_t i = 0; i < 8; ++i) {
        if (header[2 + d + i] != tail[i]) {
            throw FormatError(std::string("expected column '") + tail[i] + "'", 1);
        }
    }

    std::vector<TrajectoryRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.eof()) {
            break;
        }
        const auto fields = split_line(line);
        if (fields.size() != d + 10) {
            throw FormatError("expected " + std::to_string(d + 10) + " columns, got " +
                              std::to_string(fields.size()), line_no);
        }
        TrajectoryRecord rec;
        rec.step = static_cast<std::int64_t>(parse_double(fields[0], line_no));
        rec.t = parse_optional(fields[1], line_no);
        rec.w.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            rec.w[i] = parse_double(fields[2 + i], line_no);
        }
        rec.W = parse_double(fields[2 + d], line_no);
        rec.loss = parse_double(fields[3 + d], line_no);
        rec.imbalance = parse_double(fields[4 + d], line_no);
        rec.lr = parse_double(fields[5 + d], line_no);
        rec.band_lo = parse_optional(fields[6 + d], line_no);
        rec.band_hi = parse_optional(fields[7 + d], line_no);
        rec.eta = parse_optional(fields[8 + d], line_no);
        const std::string_view phase = fields[9 + d];
        if (phase == "optimization") {
            rec.phase = Phase::optimization;
        } else if (phase == "regularization") {
            rec.phase = Phase::regularization;
        } else if (!phase.empty()) {
            throw FormatError("unknown phase label '" + std::string(phase) + "'", line_no);
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) {
        throw FormatError("no data rows", line_no);
    }
    return records;
}

void export_phase_plot_data(std::span<const TrajectoryRecord> records,
                            std::size_t i, std::size_t j,
                            const std::filesystem::path& points_path) {
    if (records.empty()) {
        throw Error("nothing to export");
    }
    const std::size_t d = records.front().w.size();
    if (i >= d || j >= d || i == j) {
        throw IndexError("bad pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    std::ofstream out(points_path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + points_path.string() + " for writing");
    }
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo, y_hi = x_hi;
    out << "w_" << (i + 1) << ",w_" << (j + 1) << '\n';
    for (const auto& rec : records) {
        const double x = rec.w[i];
        const double y = rec.w[j];
        out << format_double(x) << ',' << format_double(y) << '\n';
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
    }
    if (!out) {
        throw IoError("write failed for " + points_path.string());
    }

    // Companion file: the minima hyperbola x*y = 1 restricted to the
    // branch the trajectory occupies, 512 samples across the padded box.
    std::filesystem::path hyper = points_path;
    hyper.replace_filename(points_path.stem().string() + "_hyperbola" +
                           points_path.extension().string());
    std::ofstream hout(hyper, std::ios::binary);
    if (!hout) {
        throw IoError("cannot open " + hyper.string() + " for writing");
    }
    const double pad_x = 0.05 * std::max(x_hi - x_lo, 1e-3);
    const double pad_y = 0.05 * std::max(y_hi - y_lo, 1e-3);
    x_lo -= pad_x;
    x_hi += pad_x;
    y_lo -= pad_y;
    y_hi += pad_y;
    // On the branch with x > 0 the hyperbola sits in y = 1/x; clip the x
    // range so y stays inside the box. Mirror for the negative branch.
    const bool positive = records.back().w[i] > 0.0;
    double lo, hi;
    if (positive) {
        lo = std::max(x_lo, y_hi > 0.0 ? 1.0 / y_hi : 1e-6);
        hi = y_lo > 0.0 ? std::min(x_hi, 1.0 / y_lo) : x_hi;
    } else {
        lo = y_lo < 0.0 ? std::max(x_lo, 1.0 / y_lo) : x_lo;
        hi = std::min(x_hi, y_hi < 0.0 ? 1.0 / y_hi : -1e-6);
    }
    if (!(lo < hi)) { // trajectory box never meets the branch; sample it anyway
        lo = positive ? 0.5 : -2.0;
        hi = positive ? 2.0 : -0.5;
    }
    hout << "w_" << (i + 1) << ",w_" << (j + 1) << '\n';
    for (int k = 0; k < 512; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / 511.0;
        hout << format_double(x) << ',' << format_double(1.0 / x) << '\n';
    }
    if (!hout) {
        throw IoError("write failed for " + hyper.string());
    }
}

void write_manifest(std::span<const ManifestEntry> entries,
                    const std::filesystem::path& path) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json obj{
            {"run_id", e.run_id}, {"rule", e.rule},   {"d", e.d},
            {"seed", e.seed},     {"lr_policy", e.lr_policy},
            {"steps", e.steps},   {"path", e.path},
        };
        obj["mu"] = e.mu ? nlohmann::json(*e.mu) : nlohmann::json();
        obj["delta"] = e.delta ? nlohmann::json(*e.delta) : nlohmann::json();
        obj["B"] = e.batch_size ? nlohmann::json(*e.batch_size) : nlohmann::json();
        obj["N"] = e.dataset_size ? nlohmann::json(*e.dataset_size) : nlohmann::json();
        list.push_back(std::move(obj));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << list.dump(2) << '\n';
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace dln
