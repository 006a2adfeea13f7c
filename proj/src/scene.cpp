// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/scene.hpp"

#include "progsplat/error.hpp"
#include "progsplat/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace progsplat {

namespace {

struct Line {
    std::size_t number = 0;
    std::string text;
};

std::vector<Line> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::vector<Line> lines;
    std::string text;
    std::size_t number = 0;
    while (std::getline(in, text)) {
        ++number;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        lines.push_back({number, text});
    }
    return lines;
}

bool is_blank(const std::string& s) {
    return s.find_first_not_of(" \t") == std::string::npos;
}

bool is_comment(const std::string& s) {
    const auto p = s.find_first_not_of(" \t");
    return p != std::string::npos && s[p] == '#';
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, const Line& line, const std::string& what) {
    fail(ErrorCode::Parse, path.filename().string() + ":" + std::to_string(line.number) + ": " + what);
}

template <class T>
T parse_number(const std::filesystem::path& path, const Line& line, const std::string& token) {
    std::istringstream in(token);
    T value{};
    in >> value;
    if (in.fail() || !in.eof()) parse_error(path, line, "bad number '" + token + "'");
    return value;
}

struct CameraModel {
    int width = 0;
    int height = 0;
    Intrinsics intrinsics;
};

std::map<int, CameraModel> read_cameras(const std::filesystem::path& path) {
    std::map<int, CameraModel> cameras;
    for (const Line& line : read_lines(path)) {
        if (is_blank(line.text) || is_comment(line.text)) continue;
        const auto t = tokens(line.text);
        if (t.size() < 4) parse_error(path, line, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
        const int id = parse_number<int>(path, line, t[0]);
        CameraModel cam;
        cam.width = parse_number<int>(path, line, t[2]);
        cam.height = parse_number<int>(path, line, t[3]);
        std::vector<double> params;
        for (std::size_t i = 4; i < t.size(); ++i) params.push_back(parse_number<double>(path, line, t[i]));
        const std::string& model = t[1];
        if (model == "PINHOLE") {
            if (params.size() != 4) parse_error(path, line, "PINHOLE needs 4 parameters");
            cam.intrinsics = {params[0], params[1], params[2], params[3]};
        } else if (model == "SIMPLE_PINHOLE") {
            if (params.size() != 3) parse_error(path, line, "SIMPLE_PINHOLE needs 3 parameters");
            cam.intrinsics = {params[0], params[0], params[1], params[2]};
        } else {
            fail(ErrorCode::UnsupportedModel, "unsupported camera model " + model + " in " +
                                                  path.filename().string() + ":" + std::to_string(line.number));
        }
        if (!cameras.emplace(id, cam).second) parse_error(path, line, "duplicate camera id");
    }
    return cameras;
}

struct ImageRecord {
    ImageId id = 0;
    Pose pose;
    int camera_id = 0;
    std::string name;
    std::size_t points2d = 0;
};

std::vector<ImageRecord> read_images(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<ImageRecord> records;
    std::size_t i = 0;
    while (i < lines.size()) {
        const Line& line = lines[i++];
        if (is_blank(line.text) || is_comment(line.text)) continue;
        const auto t = tokens(line.text);
        if (t.size() < 10) parse_error(path, line, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
        ImageRecord r;
        r.id = parse_number<int>(path, line, t[0]);
        double q[4];
        for (int k = 0; k < 4; ++k) q[k] = parse_number<double>(path, line, t[1 + k]);
        Vec3 tr;
        for (int k = 0; k < 3; ++k) tr[k] = parse_number<double>(path, line, t[5 + k]);
        if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] == 0.0) parse_error(path, line, "zero quaternion");
        r.pose = Pose::from_quaternion(q[0], q[1], q[2], q[3], tr);
        r.camera_id = parse_number<int>(path, line, t[8]);
        // Names may contain spaces: everything after CAMERA_ID.
        const std::string& text = line.text;
        std::size_t pos = 0;
        for (int k = 0; k < 9; ++k) {
            pos = text.find_first_not_of(" \t", pos);
            pos = text.find_first_of(" \t", pos);
        }
        pos = text.find_first_not_of(" \t", pos);
        r.name = text.substr(pos);
        while (!r.name.empty() && (r.name.back() == ' ' || r.name.back() == '\t')) r.name.pop_back();

        if (i < lines.size() && !is_comment(lines[i].text)) {
            const Line& pts = lines[i++];
            const auto p = tokens(pts.text);
            if (p.size() % 3 != 0) parse_error(path, pts, "POINTS2D entries must be X Y POINT3D_ID triples");
            for (std::size_t k = 0; k < p.size(); k += 3) {
                parse_number<double>(path, pts, p[k]);
                parse_number<double>(path, pts, p[k + 1]);
                parse_number<long long>(path, pts, p[k + 2]);
            }
            r.points2d = p.size() / 3;
        }
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace

const CameraFrame& SceneBundle::frame(ImageId id) const {
    for (const auto& f : frames) {
        if (f.image_id == id) return f;
    }
    fail(ErrorCode::NotFound, "image id " + std::to_string(id) + " not in bundle");
}

CameraFrame& SceneBundle::frame(ImageId id) {
    return const_cast<CameraFrame&>(std::as_const(*this).frame(id));
}

ImageId SceneBundle::id_by_name(const std::string& name) const {
    for (const auto& f : frames) {
        if (f.name == name) return f.image_id;
    }
    fail(ErrorCode::NotFound, "image '" + name + "' not in bundle");
}

int SceneBundle::match_count(ImageId a, ImageId b) const {
    const auto it = matches.find({std::min(a, b), std::max(a, b)});
    return it == matches.end() ? 0 : it->second;
}

std::map<ImageId, Pose> read_colmap_poses(const std::filesystem::path& images_txt) {
    std::map<ImageId, Pose> poses;
    for (const auto& r : read_images(images_txt)) poses[r.id] = r.pose;
    return poses;
}

SceneBundle read_colmap_text(const std::filesystem::path& dir) {
    for (const char* name : {"cameras.txt", "images.txt", "points3D.txt"}) {
        if (!std::filesystem::exists(dir / name)) fail(ErrorCode::Io, "missing file " + (dir / name).string());
    }
    const auto cameras = read_cameras(dir / "cameras.txt");
    const auto images = read_images(dir / "images.txt");

    SceneBundle bundle;
    std::set<ImageId> ids;
    for (const auto& r : images) {
        if (!ids.insert(r.id).second) fail(ErrorCode::Parse, "images.txt: duplicate image id " + std::to_string(r.id));
        const auto cam = cameras.find(r.camera_id);
        if (cam == cameras.end()) {
            fail(ErrorCode::Parse, "images.txt: image " + std::to_string(r.id) + " references unknown camera " +
                                       std::to_string(r.camera_id));
        }
        CameraFrame f;
        f.image_id = r.id;
        f.name = r.name;
        f.width = cam->second.width;
        f.height = cam->second.height;
        f.intrinsics = cam->second.intrinsics;
        f.pose = r.pose;
        f.feature_count = static_cast<int>(r.points2d);
        bundle.frames.push_back(std::move(f));
        bundle.replay_order.push_back(r.id);
    }

    const std::filesystem::path points_path = dir / "points3D.txt";
    std::map<ImageId, int> observations;
    for (const Line& line : read_lines(points_path)) {
        if (is_blank(line.text) || is_comment(line.text)) continue;
        const auto t = tokens(line.text);
        if (t.size() < 8 || (t.size() - 8) % 2 != 0) {
            parse_error(points_path, line, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]");
        }
        ScenePoint p;
        p.id = parse_number<std::int64_t>(points_path, line, t[0]);
        for (int k = 0; k < 3; ++k) p.position[k] = parse_number<double>(points_path, line, t[1 + k]);
        for (int k = 0; k < 3; ++k) {
            const int c = parse_number<int>(points_path, line, t[4 + k]);
            if (c < 0 || c > 255) parse_error(points_path, line, "color out of range");
            p.color[k] = c / 255.0;
        }
        parse_number<double>(points_path, line, t[7]);
        std::set<ImageId> track;
        for (std::size_t k = 8; k < t.size(); k += 2) {
            const ImageId img = parse_number<int>(points_path, line, t[k]);
            parse_number<long long>(points_path, line, t[k + 1]);
            if (!ids.count(img)) parse_error(points_path, line, "track references unknown image " + std::to_string(img));
            track.insert(img);
        }
        p.track.assign(track.begin(), track.end());
        const std::size_t index = bundle.points.size();
        for (std::size_t a = 0; a < p.track.size(); ++a) {
            bundle.image_points[p.track[a]].push_back(index);
            ++observations[p.track[a]];
            for (std::size_t b = a + 1; b < p.track.size(); ++b) ++bundle.matches[{p.track[a], p.track[b]}];
        }
        bundle.points.push_back(std::move(p));
    }
    for (auto& f : bundle.frames) f.feature_count = std::max(f.feature_count, observations[f.image_id]);
    return bundle;
}

void write_colmap_text(const SceneBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) fail(ErrorCode::Io, "cannot write " + (dir / name).string());
        out << std::setprecision(17);
        return out;
    };

    std::ofstream cams = open("cameras.txt");
    cams << "# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n";
    for (const auto& f : bundle.frames) {
        const auto& k = f.intrinsics;
        cams << f.image_id << " PINHOLE " << f.width << ' ' << f.height << ' ' << k.fx << ' ' << k.fy << ' ' << k.cx
             << ' ' << k.cy << '\n';
    }

    // Point2D index of each (image, point) pair, as referenced from tracks.
    std::map<std::pair<ImageId, std::size_t>, std::size_t> point2d_index;
    std::ofstream imgs = open("images.txt");
    imgs << "# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto& f : bundle.frames) {
        const Eigen::Quaterniond q(f.pose.rotation);
        const Vec3& t = f.pose.translation;
        imgs << f.image_id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << t.x() << ' '
             << t.y() << ' ' << t.z() << ' ' << f.image_id << ' ' << f.name << '\n';
        const auto it = bundle.image_points.find(f.image_id);
        bool first = true;
        if (it != bundle.image_points.end()) {
            for (std::size_t k = 0; k < it->second.size(); ++k) {
                const auto& p = bundle.points[it->second[k]];
                const Vec3 c = f.pose.rotation * p.position + f.pose.translation;
                const double u = c.z() != 0.0 ? f.intrinsics.fx * c.x() / c.z() + f.intrinsics.cx : 0.0;
                const double v = c.z() != 0.0 ? f.intrinsics.fy * c.y() / c.z() + f.intrinsics.cy : 0.0;
                imgs << (first ? "" : " ") << u << ' ' << v << ' ' << p.id;
                first = false;
                point2d_index[{f.image_id, it->second[k]}] = k;
            }
        }
        imgs << '\n';
    }

    std::ofstream pts = open("points3D.txt");
    pts << "# POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (std::size_t i = 0; i < bundle.points.size(); ++i) {
        const auto& p = bundle.points[i];
        pts << p.id << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z();
        for (int k = 0; k < 3; ++k) pts << ' ' << static_cast<int>(std::lround(std::clamp(p.color[k], 0.0, 1.0) * 255.0));
        pts << " 0";
        for (ImageId img : p.track) {
            const auto it = point2d_index.find({img, i});
            pts << ' ' << img << ' ' << (it == point2d_index.end() ? 0 : it->second);
        }
        pts << '\n';
    }
    for (std::ofstream* s : {&cams, &imgs, &pts}) {
        s->flush();
        if (!*s) fail(ErrorCode::Io, "write failed under " + dir.string());
    }
}

std::vector<std::string> read_name_list(const std::filesystem::path& path) {
    std::vector<std::string> names;
    for (const Line& line : read_lines(path)) {
        if (is_blank(line.text) || is_comment(line.text)) continue;
        const auto b = line.text.find_first_not_of(" \t");
        const auto e = line.text.find_last_not_of(" \t");
        names.push_back(line.text.substr(b, e - b + 1));
    }
    return names;
}

void apply_replay_order(SceneBundle& bundle, const std::vector<std::string>& names) {
    std::vector<ImageId> order;
    std::set<ImageId> seen;
    for (const auto& name : names) {
        const ImageId id = bundle.id_by_name(name);
        if (!seen.insert(id).second) fail(ErrorCode::InvalidParameter, "replay order lists '" + name + "' twice");
        order.push_back(id);
    }
    bundle.replay_order = std::move(order);
}

void load_images(SceneBundle& bundle, const std::filesystem::path& dir, int downscale) {
    if (downscale < 1) fail(ErrorCode::InvalidParameter, "downscale factor must be >= 1");
    for (auto& f : bundle.frames) {
        Image img = read_ppm(dir / f.name);
        if (img.width != f.width || img.height != f.height) {
            fail(ErrorCode::InvalidParameter, "image '" + f.name + "' is " + std::to_string(img.width) + "x" +
                                                  std::to_string(img.height) + " but its camera declares " +
                                                  std::to_string(f.width) + "x" + std::to_string(f.height));
        }
        if (downscale > 1) {
            img = downscale_image(img, downscale);
            f.width = img.width;
            f.height = img.height;
            f.intrinsics.fx /= downscale;
            f.intrinsics.fy /= downscale;
            f.intrinsics.cx /= downscale;
            f.intrinsics.cy /= downscale;
        }
        f.pixels = std::move(img);
    }
}

} // namespace progsplat
