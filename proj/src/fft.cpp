#include "qlab/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace qlab::fft {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Plan {
public:
    explicit Plan(fftw_plan p) : plan_(p) {}
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

int sign_of(Direction dir) { return dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD; }

}  // namespace

void transform_1d(std::span<cplx> data, Direction dir) {
    if (data.empty()) return;
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, sign_of(dir), FFTW_ESTIMATE);
    }
    Plan(raw).execute();
}

void transform_2d(std::span<cplx> data, std::size_t n, Direction dir) {
    if (data.empty()) return;
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), ptr, ptr, sign_of(dir),
                               FFTW_ESTIMATE);
    }
    Plan(raw).execute();
}

}  // namespace qlab::fft
