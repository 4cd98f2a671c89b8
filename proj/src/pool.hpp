/*
 Copyright 2026 The fthjb Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace fthjb::detail {

// Free list of per-thread workspaces.
template <typename T>
class Pool {
public:
    explicit Pool(std::function<std::unique_ptr<T>()> make) : make_(std::move(make)) {}

    class Lease {
    public:
        Lease(Pool& pool, std::unique_ptr<T> obj) : pool_(pool), obj_(std::move(obj)) {}
        Lease(const Lease&) = delete;
        Lease& operator=(const Lease&) = delete;
        ~Lease() { pool_.put(std::move(obj_)); }
        T* operator->() { return obj_.get(); }
        T& operator*() { return *obj_; }

    private:
        Pool& pool_;
        std::unique_ptr<T> obj_;
    };

    Lease acquire() {
        {
            std::lock_guard lock(mutex_);
            if (!free_.empty()) {
                auto obj = std::move(free_.back());
                free_.pop_back();
                return Lease(*this, std::move(obj));
            }
        }
        return Lease(*this, make_());
    }

private:
    void put(std::unique_ptr<T> obj) {
        std::lock_guard lock(mutex_);
        free_.push_back(std::move(obj));
    }

    std::function<std::unique_ptr<T>()> make_;
    std::mutex mutex_;
    std::vector<std::unique_ptr<T>> free_;
};

}  // namespace fthjb::detail
