#pragma once

#include "snore/evalstat.hpp"
#include "snore/learner.hpp"
#include "snore/matrix.hpp"
#include "snore/tfr.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace snore {

/// create_directories that reports failure as IoError.
void make_directories(const std::filesystem::path& dir);

/// CSV grid: first row "freq_hz,<frame times...>", then one row per bin
/// starting with its center frequency.
void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& spec);

/// Same layout for an arbitrary matrix sharing a spectrogram's axes (e.g. a mask).
void write_matrix_csv(const std::filesystem::path& path, const Matrix& values, const Spectrogram& axes);

/// Reads the layout written above. Hop and offset are recovered from the
/// frame-time header at `sample_rate`.
Spectrogram read_spectrogram_csv(const std::filesystem::path& path, TfrKind kind, int sample_rate);

/// 8-bit grayscale PNG, row 0 at the top.
void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels);

/// Log-compressed image of a magnitude matrix: 0 dB (the image max) maps to
/// 255, -80 dB and below to 0. Highest bin at the top. An all-zero matrix is black.
std::vector<std::uint8_t> render_magnitude(const Matrix& values);

void write_spectrogram_png(const std::filesystem::path& path, const Matrix& values);

/// Linear image of a [0, 1] mask (1 is white), highest bin at the top.
std::vector<std::uint8_t> render_mask(const Matrix& mask);
void write_mask_png(const std::filesystem::path& path, const Matrix& mask);

/// Two magnitude images next to each other with a 4-pixel white divider;
/// each half is normalized independently.
void write_side_by_side_png(const std::filesystem::path& path, const Matrix& left, const Matrix& right);

/// Polyline chart of one or more series on a shared axis box (black on white).
void write_line_plot_png(const std::filesystem::path& path, const std::vector<std::vector<double>>& xs,
                         const std::vector<std::vector<double>>& ys, std::size_t width = 480,
                         std::size_t height = 320);

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc);

void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report);

/// JSON checkpoint of every CNN parameter block: a format tag, a version and,
/// per block, its name, shape and row-major values.
void write_checkpoint(const std::filesystem::path& path, const ModelParams& model);

/// Throws ParseError on malformed JSON, an unknown version or a shape that
/// does not match the network.
ModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace snore
