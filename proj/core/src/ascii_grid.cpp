#include "aodfill/ascii_grid.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aodfill/date.hpp"
#include "aodfill/errors.hpp"
#include "aodfill/text_format.hpp"

namespace aodfill {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string band_tag_from_filename(const std::filesystem::path& path) {
    const std::string stem = path.stem().string();
    const auto underscore = stem.rfind('_');
    if (underscore != std::string::npos) {
        try {
            DateStamp::parse(stem.substr(underscore + 1));
            return stem.substr(0, underscore);
        } catch (const InputError&) {
            // no date suffix; fall through
        }
    }
    return stem;
}

class Tokenizer {
public:
    explicit Tokenizer(std::string text) : text_(std::move(text)) {}

    std::optional<std::string_view> next() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ >= text_.size()) return std::nullopt;
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        return std::string_view(text_).substr(start, pos_ - start);
    }

private:
    std::string text_;
    std::size_t pos_ = 0;
};

} // namespace

Grid read_ascii_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open grid file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    Tokenizer tokens(buf.str());

    const std::string where = " in " + path.string();
    auto need = [&](const char* what) -> std::string_view {
        const auto t = tokens.next();
        if (!t) throw InputError(std::string("unexpected end of file, expected ") +
                                 what + where);
        return *t;
    };
    auto need_double = [&](const char* what) {
        double v;
        if (!parse_double(need(what), v))
            throw InputError(std::string("cannot parse ") + what + where);
        return v;
    };

    long long n_cols = -1, n_rows = -1;
    double xll = 0.0, yll = 0.0, cell = 0.0;
    std::optional<double> nodata;
    std::optional<std::string_view> pending;

    for (int i = 0; i < 6; ++i) {
        const auto t = tokens.next();
        if (!t) throw InputError("unexpected end of header" + where);
        const std::string key = lower(std::string(*t));
        if (key == "ncols") {
            n_cols = static_cast<long long>(need_double("ncols"));
        } else if (key == "nrows") {
            n_rows = static_cast<long long>(need_double("nrows"));
        } else if (key == "xllcorner") {
            xll = need_double("xllcorner");
        } else if (key == "yllcorner") {
            yll = need_double("yllcorner");
        } else if (key == "cellsize") {
            cell = need_double("cellsize");
        } else if (key == "nodata_value") {
            nodata = need_double("NODATA_value");
        } else {
            // first data token of a file without a NODATA_value line
            pending = *t;
            break;
        }
    }
    if (n_cols < 1 || n_rows < 1)
        throw InputError("missing or invalid ncols/nrows header" + where);
    if (!(cell > 0.0)) throw InputError("cellsize must be positive" + where);

    Grid g(static_cast<int>(n_cols), static_cast<int>(n_rows), xll,
           yll + static_cast<double>(n_rows) * cell, cell,
           band_tag_from_filename(path));

    const std::size_t total = g.cell_count();
    for (std::size_t i = 0; i < total; ++i) {
        std::string_view tok;
        if (pending) {
            tok = *pending;
            pending.reset();
        } else {
            const auto t = tokens.next();
            if (!t)
                throw InputError("grid body ends early, expected " +
                                 std::to_string(total) + " values" + where);
            tok = *t;
        }
        double v;
        if (!parse_double(tok, v))
            throw InputError("cannot parse grid value '" + std::string(tok) + "'" +
                             where);
        const int row = static_cast<int>(i / static_cast<std::size_t>(n_cols));
        const int col = static_cast<int>(i % static_cast<std::size_t>(n_cols));
        if (!nodata || v != *nodata) g.set(col, row, v);
    }
    if (tokens.next())
        throw InputError("unexpected trailing content after grid body" + where);
    return g;
}

void write_ascii_grid(const Grid& g, const std::filesystem::path& path,
                      double nodata) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write grid file " + path.string());
    const double yll =
        g.y_origin() - static_cast<double>(g.n_rows()) * g.cell_size();
    out << "ncols " << g.n_cols() << '\n';
    out << "nrows " << g.n_rows() << '\n';
    out << "xllcorner " << format_double(g.x_origin()) << '\n';
    out << "yllcorner " << format_double(yll) << '\n';
    out << "cellsize " << format_double(g.cell_size()) << '\n';
    out << "NODATA_value " << format_double(nodata) << '\n';
    std::string line;
    for (int row = 0; row < g.n_rows(); ++row) {
        line.clear();
        for (int col = 0; col < g.n_cols(); ++col) {
            if (col > 0) line += ' ';
            if (g.valid(col, row)) {
                const double v = g.value(col, row);
                if (v == nodata)
                    throw InputError("valid cell equals the nodata sentinel " +
                                     format_double(nodata) + "; writing " +
                                     path.string() +
                                     " would corrupt the validity mask");
                line += format_double(v);
            } else {
                line += format_double(nodata);
            }
        }
        line += '\n';
        out << line;
    }
    if (!out) throw InputError("write failed for " + path.string());
}

} // namespace aodfill
