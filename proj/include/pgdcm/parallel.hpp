#ifndef PGDCM_PARALLEL_HPP
#define PGDCM_PARALLEL_HPP

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pgdcm {

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Chunk `c` of `n` indices split into `chunks` contiguous pieces. The
/// boundaries depend only on (n, chunks), never on scheduling.
inline IndexRange chunk_range(std::size_t n, std::size_t chunks, std::size_t c) {
    return {c * n / chunks, (c + 1) * n / chunks};
}

/// Fixed set of worker threads that execute one batch of chunk tasks at a
/// time. Task 0 runs on the calling thread; `run` returns after every task
/// has finished and rethrows the first exception raised by a task.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers) : size_(std::max<std::size_t>(1, workers)) {
        for (std::size_t w = 1; w < size_; ++w) {
            threads_.emplace_back([this, w] { worker_loop(w); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        wake_.notify_all();
        for (auto& t : threads_) {
            t.join();
        }
    }

    std::size_t size() const { return size_; }

    /// Runs task(c) for c in [0, size()).
    void run(const std::function<void(std::size_t)>& task) {
        if (size_ == 1) {
            task(0);
            return;
        }
        {
            std::lock_guard lock(mutex_);
            task_ = &task;
            pending_ = size_ - 1;
            error_ = nullptr;
            ++generation_;
        }
        wake_.notify_all();

        std::exception_ptr local;
        try {
            task(0);
        } catch (...) {
            local = std::current_exception();
        }

        std::unique_lock lock(mutex_);
        done_.wait(lock, [this] { return pending_ == 0; });
        task_ = nullptr;
        if (local) {
            std::rethrow_exception(local);
        }
        if (error_) {
            std::rethrow_exception(error_);
        }
    }

private:
    void worker_loop(std::size_t index) {
        std::size_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t)>* task = nullptr;
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
                if (stopping_) {
                    return;
                }
                seen = generation_;
                task = task_;
            }
            std::exception_ptr err;
            try {
                (*task)(index);
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::lock_guard lock(mutex_);
                if (err && !error_) {
                    error_ = err;
                }
                if (--pending_ == 0) {
                    done_.notify_one();
                }
            }
        }
    }

    std::size_t size_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* task_ = nullptr;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    bool stopping_ = false;
    std::exception_ptr error_;
};

} // namespace pgdcm

#endif
