#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace spinpat {

using BitVector = std::vector<std::uint8_t>;

class BinaryImage {
public:
    BinaryImage() = default;
    BinaryImage(int rows, int cols, std::uint8_t fill = 0);
    BinaryImage(int rows, int cols, BitVector bits);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::uint8_t at(int r, int c) const { return bits_[static_cast<std::size_t>(r) * cols_ + c]; }
    void set(int r, int c, std::uint8_t v);
    BitVector row(int r) const;
    BitVector column(int c) const;
    BinaryImage inverted() const;
    const BitVector& bits() const { return bits_; }

    bool operator==(const BinaryImage&) const = default;

private:
    int rows_{0};
    int cols_{0};
    BitVector bits_;
};

using TrainingSet = std::vector<BinaryImage>;

struct ClusterIndex {
    int i{1};  // 1-based row
    int j{1};  // 1-based column block

    std::string label() const;  // "C52"
    bool operator==(const ClusterIndex&) const = default;
    auto operator<=>(const ClusterIndex&) const = default;
};

struct Cluster {
    ClusterIndex index;
    BitVector bits;
};

struct ClusterExpectation {
    ClusterIndex index;
    int match_count{0};
    bool switch_expected{false};
};

int hamming(const BitVector& x, const BitVector& y);

// Every row pair has Hamming distance strictly below floor(n/2).
bool mainly_similar(const BinaryImage& a, const BinaryImage& b);

BinaryImage mean_image(const TrainingSet& set);

// Exhaustive check of x xor nint(mean y) == nint(mean(x xor y)) for all 2^(P+1) assignments.
bool prop1_check(int p);

int row_match_count(const BitVector& a, const BitVector& b);

std::vector<Cluster> partition_clusters(const BinaryImage& image, int block_cols = 3);

std::vector<ClusterExpectation> logic_oracle_detect(const TrainingSet& training,
                                                    const BinaryImage& input, int block_cols = 3);

// Per-pixel compare-then-majority, the order the comparator-first circuit evaluates.
BinaryImage compare_then_majority(const TrainingSet& training, const BinaryImage& input);
BinaryImage xnor_image(const BinaryImage& a, const BinaryImage& b);

// ASCII grid of '0'/'1', one row per line; '#' starts a comment line.
BinaryImage read_ascii_image(std::istream& in);
void write_ascii_image(std::ostream& out, const BinaryImage& image);
// Plain PBM (P1).
BinaryImage read_pbm(std::istream& in);
void write_pbm(std::ostream& out, const BinaryImage& image);
// Dispatches on content: "P1" header selects PBM, otherwise ASCII.
BinaryImage load_image(const std::string& path);

}  // namespace spinpat
