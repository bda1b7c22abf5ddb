#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "rdm/likelihood.hpp"
#include "rdm/linalg.hpp"

namespace rdm::test {

// f(z) = A z with a known Jacobian; time-independent
class LinearField : public FlowField {
public:
    explicit LinearField(MatrixD a) : a_(std::move(a)) {}
    std::size_t dim() const override { return a_.rows; }
    void eval(double, std::span<const double> z, std::span<double> out) const override {
        for (std::size_t i = 0; i < a_.rows; ++i) out[i] = dot(a_.row(i), z.data(), a_.cols);
    }
    void eval_with_jvp(double t, std::span<const double> z, std::span<const double> dir,
                       std::span<double> out, std::span<double> jvp) const override {
        eval(t, z, out);
        for (std::size_t i = 0; i < a_.rows; ++i) jvp[i] = dot(a_.row(i), dir.data(), a_.cols);
    }
    double trace() const {
        double s = 0;
        for (std::size_t i = 0; i < a_.rows; ++i) s += a_.at(i, i);
        return s;
    }

private:
    MatrixD a_;
};

class ConstantField : public FlowField {
public:
    explicit ConstantField(std::vector<double> c) : c_(std::move(c)) {}
    std::size_t dim() const override { return c_.size(); }
    void eval(double, std::span<const double>, std::span<double> out) const override {
        for (std::size_t i = 0; i < c_.size(); ++i) out[i] = c_[i];
    }
    void eval_with_jvp(double t, std::span<const double> z, std::span<const double>,
                       std::span<double> out, std::span<double> jvp) const override {
        eval(t, z, out);
        for (auto& x : jvp) x = 0.0;
    }

private:
    std::vector<double> c_;
};

// unique scratch directory under the system temp dir, removed on destruction
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 eng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("rdm_" + tag + "_" + std::to_string(eng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline double std_normal_logpdf(std::span<const double> z, double sigma = 1.0) {
    const double d = static_cast<double>(z.size());
    double q = 0;
    for (double x : z) q += x * x;
    return -0.5 * d * std::log(2.0 * 3.1415926535897932384626433832795 * sigma * sigma) -
           0.5 * q / (sigma * sigma);
}

}  // namespace rdm::test
