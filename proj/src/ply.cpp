// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/ply.hpp"

#include "progsplat/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace progsplat {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

std::vector<std::string> property_names(int sh_degree) {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = 3 * (sh::coeff_count(sh_degree) - 1);
    for (int i = 0; i < rest; ++i) names.push_back("f_rest_" + std::to_string(i));
    names.push_back("opacity");
    for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
    return names;
}

// Values in property_names order.
std::vector<double> flatten(const Gaussian& g, int sh_degree) {
    const int coeffs = sh::coeff_count(sh_degree);
    std::vector<double> v = {g.position[0], g.position[1], g.position[2], 0.0, 0.0, 0.0, g.sh[0], g.sh[1], g.sh[2]};
    for (int c = 0; c < 3; ++c) {
        for (int k = 1; k < coeffs; ++k) v.push_back(g.sh[k * 3 + c]);
    }
    v.push_back(g.opacity_logit);
    for (double s : g.log_scale) v.push_back(s);
    for (double r : g.rotation) v.push_back(r);
    return v;
}

Gaussian unflatten(const std::vector<double>& v, int sh_degree) {
    const int coeffs = sh::coeff_count(sh_degree);
    Gaussian g;
    std::size_t i = 0;
    for (int k = 0; k < 3; ++k) g.position[k] = v[i++];
    i += 3;
    for (int c = 0; c < 3; ++c) g.sh[c] = v[i++];
    for (int c = 0; c < 3; ++c) {
        for (int k = 1; k < coeffs; ++k) g.sh[k * 3 + c] = v[i++];
    }
    g.opacity_logit = v[i++];
    for (int k = 0; k < 3; ++k) g.log_scale[k] = v[i++];
    for (int k = 0; k < 4; ++k) g.rotation[k] = v[i++];
    return g;
}

struct Property {
    std::string name;
    bool is_double = false;
};

} // namespace

void write_ply(const GaussianField& field, const std::filesystem::path& path, PlyPrecision precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    const bool dbl = precision == PlyPrecision::Float64;
    const auto names = property_names(field.sh_degree);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << field.size() << '\n';
    for (const auto& n : names) out << "property " << (dbl ? "double " : "float ") << n << '\n';
    out << "end_header\n";

    std::vector<char> row(names.size() * (dbl ? 8 : 4));
    for (const auto& g : field.gaussians) {
        const auto v = flatten(g, field.sh_degree);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (dbl) {
                std::memcpy(row.data() + i * 8, &v[i], 8);
            } else {
                const float f = static_cast<float>(v[i]);
                std::memcpy(row.data() + i * 4, &f, 4);
            }
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

GaussianField read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    const std::string name = path.string();
    auto bad = [&](const std::string& what) { fail(ErrorCode::Parse, name + ": " + what); };

    std::string line;
    if (!std::getline(in, line) || line != "ply") bad("missing ply magic");
    std::size_t count = 0;
    bool have_vertex = false;
    bool binary_le = false;
    std::vector<Property> props;
    while (true) {
        if (!std::getline(in, line)) bad("unterminated header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (word == "element") {
            std::string elem;
            ls >> elem >> count;
            if (elem != "vertex" || have_vertex || ls.fail()) bad("unsupported element '" + elem + "'");
            have_vertex = true;
        } else if (word == "property") {
            std::string type, pname;
            ls >> type >> pname;
            if (type == "double" || type == "float64") {
                props.push_back({pname, true});
            } else if (type == "float" || type == "float32") {
                props.push_back({pname, false});
            } else {
                bad("unsupported property type '" + type + "'");
            }
        } else {
            bad("unexpected header line '" + line + "'");
        }
    }
    if (!binary_le) bad("only binary_little_endian is supported");
    if (!have_vertex) bad("no vertex element");

    int rest = 0;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < props.size(); ++i) {
        if (!index.emplace(props[i].name, i).second) bad("duplicate property " + props[i].name);
        if (props[i].name.rfind("f_rest_", 0) == 0) ++rest;
    }
    int degree = -1;
    for (int d = 0; d <= sh::kMaxDegree; ++d) {
        if (rest == 3 * (sh::coeff_count(d) - 1)) degree = d;
    }
    if (degree < 0) bad("f_rest count " + std::to_string(rest) + " matches no SH degree");
    const auto names = property_names(degree);
    std::vector<std::size_t> source(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto it = index.find(names[i]);
        if (it == index.end()) {
            if (names[i][0] == 'n') {
                source[i] = SIZE_MAX;
                continue;
            }
            bad("missing property " + names[i]);
        }
        source[i] = it->second;
    }

    std::vector<std::size_t> offset(props.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < props.size(); ++i) {
        offset[i] = stride;
        stride += props[i].is_double ? 8 : 4;
    }

    GaussianField field;
    field.sh_degree = degree;
    field.gaussians.reserve(count);
    std::vector<char> row(stride);
    std::vector<double> values(names.size());
    for (std::size_t n = 0; n < count; ++n) {
        if (!in.read(row.data(), static_cast<std::streamsize>(stride))) bad("truncated vertex data");
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (source[i] == SIZE_MAX) {
                values[i] = 0.0;
                continue;
            }
            const char* p = row.data() + offset[source[i]];
            if (props[source[i]].is_double) {
                std::memcpy(&values[i], p, 8);
            } else {
                float f;
                std::memcpy(&f, p, 4);
                values[i] = f;
            }
        }
        field.gaussians.push_back(unflatten(values, degree));
    }
    return field;
}

} // namespace progsplat
