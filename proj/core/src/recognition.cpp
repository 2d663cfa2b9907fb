#include "spinpat/recognition.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spinpat/errors.hpp"

namespace spinpat {

BinaryImage::BinaryImage(int rows, int cols, std::uint8_t fill)
    : BinaryImage(rows, cols, BitVector(static_cast<std::size_t>(std::max(rows, 0)) * std::max(cols, 0), fill)) {}

BinaryImage::BinaryImage(int rows, int cols, BitVector bits) : rows_(rows), cols_(cols), bits_(std::move(bits)) {
    if (rows < 1 || cols < 1) throw Error(ErrorKind::InvalidInput, "image dimensions must be >= 1");
    if (bits_.size() != static_cast<std::size_t>(rows) * cols) {
        throw Error(ErrorKind::DimensionMismatch, "bit count does not match image dimensions");
    }
    for (auto b : bits_)
        if (b > 1) throw Error(ErrorKind::InvalidInput, "image bits must be 0 or 1");
}

void BinaryImage::set(int r, int c, std::uint8_t v) {
    if (v > 1) throw Error(ErrorKind::InvalidInput, "image bits must be 0 or 1");
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw Error(ErrorKind::InvalidInput, "pixel out of range");
    bits_[static_cast<std::size_t>(r) * cols_ + c] = v;
}

BitVector BinaryImage::row(int r) const {
    return BitVector(bits_.begin() + static_cast<long>(r) * cols_, bits_.begin() + static_cast<long>(r + 1) * cols_);
}

BitVector BinaryImage::column(int c) const {
    BitVector out;
    for (int r = 0; r < rows_; ++r) out.push_back(at(r, c));
    return out;
}

BinaryImage BinaryImage::inverted() const {
    BitVector b = bits_;
    for (auto& x : b) x ^= 1;
    return {rows_, cols_, std::move(b)};
}

std::string ClusterIndex::label() const { return "C" + std::to_string(i) + std::to_string(j); }

int hamming(const BitVector& x, const BitVector& y) {
    if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "bit-vectors differ in length");
    int d = 0;
    for (std::size_t k = 0; k < x.size(); ++k) d += x[k] != y[k];
    return d;
}

bool mainly_similar(const BinaryImage& a, const BinaryImage& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "images differ in dimensions");
    }
    if (a.cols() == 1) {
        spdlog::warn("mainly_similar with a single column is always false");
        return false;
    }
    const int bound = a.cols() / 2;
    for (int r = 0; r < a.rows(); ++r) {
        if (hamming(a.row(r), b.row(r)) >= bound) return false;
    }
    return true;
}

namespace {

void check_training(const TrainingSet& set) {
    if (set.empty()) throw Error(ErrorKind::InvalidTrainingSet, "empty training set");
    if (set.size() % 2 == 0) throw Error(ErrorKind::InvalidTrainingSet, "training count must be odd");
    for (const auto& img : set) {
        if (img.rows() != set[0].rows() || img.cols() != set[0].cols()) {
            throw Error(ErrorKind::DimensionMismatch, "training images differ in dimensions");
        }
    }
}

}  // namespace

BinaryImage mean_image(const TrainingSet& set) {
    check_training(set);
    const int p = static_cast<int>(set.size());
    BinaryImage out(set[0].rows(), set[0].cols());
    for (int r = 0; r < out.rows(); ++r) {
        for (int c = 0; c < out.cols(); ++c) {
            int ones = 0;
            for (const auto& img : set) ones += img.at(r, c);
            out.set(r, c, 2 * ones > p ? 1 : 0);
        }
    }
    return out;
}

bool prop1_check(int p) {
    if (p < 1 || p % 2 == 0) throw Error(ErrorKind::InvalidTrainingSet, "P must be odd and positive");
    if (p > 15) throw Error(ErrorKind::InvalidParameter, "P above 15 is not enumerated");
    const std::uint32_t ymask = (1u << p) - 1u;
    for (std::uint32_t x = 0; x <= 1; ++x) {
        for (std::uint32_t y = 0; y <= ymask; ++y) {
            const int sum_y = __builtin_popcount(y);
            const int sum_xy = __builtin_popcount(x ? (~y & ymask) : y);
            const std::uint32_t lhs = x ^ static_cast<std::uint32_t>(2 * sum_y > p);
            const std::uint32_t rhs = static_cast<std::uint32_t>(2 * sum_xy > p);
            if (lhs != rhs) return false;
        }
    }
    return true;
}

int row_match_count(const BitVector& a, const BitVector& b) {
    return static_cast<int>(a.size()) - hamming(a, b);
}

std::vector<Cluster> partition_clusters(const BinaryImage& image, int block_cols) {
    if (block_cols < 1 || image.cols() % block_cols != 0) {
        throw Error(ErrorKind::Partition, "image width is not divisible by the block width");
    }
    std::vector<Cluster> out;
    for (int r = 0; r < image.rows(); ++r) {
        for (int j = 0; j < image.cols() / block_cols; ++j) {
            Cluster c{{r + 1, j + 1}, {}};
            for (int k = 0; k < block_cols; ++k) c.bits.push_back(image.at(r, j * block_cols + k));
            out.push_back(std::move(c));
        }
    }
    return out;
}

BinaryImage xnor_image(const BinaryImage& a, const BinaryImage& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "images differ in dimensions");
    }
    BitVector bits(a.bits().size());
    for (std::size_t k = 0; k < bits.size(); ++k) bits[k] = a.bits()[k] == b.bits()[k];
    return {a.rows(), a.cols(), std::move(bits)};
}

BinaryImage compare_then_majority(const TrainingSet& training, const BinaryImage& input) {
    check_training(training);
    TrainingSet compared;
    for (const auto& t : training) compared.push_back(xnor_image(t, input));
    return mean_image(compared);
}

std::vector<ClusterExpectation> logic_oracle_detect(const TrainingSet& training,
                                                    const BinaryImage& input, int block_cols) {
    const BinaryImage matches = xnor_image(mean_image(training), input);
    std::vector<ClusterExpectation> out;
    for (const auto& c : partition_clusters(matches, block_cols)) {
        int count = 0;
        for (auto b : c.bits) count += b;
        out.push_back({c.index, count, 2 * count > block_cols});
    }
    return out;
}

BinaryImage read_ascii_image(std::istream& in) {
    std::string line;
    BitVector bits;
    int rows = 0;
    int cols = -1;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        int count = 0;
        for (char ch : line) {
            if (ch == '0' || ch == '1') {
                bits.push_back(static_cast<std::uint8_t>(ch - '0'));
                ++count;
            } else if (ch != ' ' && ch != '\t') {
                throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unexpected character");
            }
        }
        if (count == 0) continue;
        if (cols >= 0 && count != cols) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": ragged row");
        }
        cols = count;
        ++rows;
    }
    if (rows == 0) throw Error(ErrorKind::Parse, "image has no rows");
    return {rows, cols, std::move(bits)};
}

void write_ascii_image(std::ostream& out, const BinaryImage& image) {
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) out << static_cast<char>('0' + image.at(r, c));
        out << '\n';
    }
}

BinaryImage read_pbm(std::istream& in) {
    std::string content;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        content += line + '\n';
    }
    std::istringstream tokens(content);
    std::string magic;
    int cols = 0;
    int rows = 0;
    tokens >> magic >> cols >> rows;
    if (magic != "P1" || !tokens || cols < 1 || rows < 1) throw Error(ErrorKind::Parse, "bad PBM header");
    BitVector bits;
    char ch = 0;
    while (bits.size() < static_cast<std::size_t>(rows) * cols && tokens >> ch) {
        if (ch != '0' && ch != '1') throw Error(ErrorKind::Parse, "PBM raster must hold 0/1");
        bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    if (bits.size() != static_cast<std::size_t>(rows) * cols) throw Error(ErrorKind::Parse, "PBM raster is short");
    return {rows, cols, std::move(bits)};
}

void write_pbm(std::ostream& out, const BinaryImage& image) {
    out << "P1\n" << image.cols() << ' ' << image.rows() << '\n';
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) out << (c ? " " : "") << static_cast<int>(image.at(r, c));
        out << '\n';
    }
}

BinaryImage load_image(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read image '" + path + "'");
    std::string first;
    in >> first;
    in.clear();
    in.seekg(0);
    if (first.rfind("P1", 0) == 0) return read_pbm(in);
    return read_ascii_image(in);
}

}  // namespace spinpat
