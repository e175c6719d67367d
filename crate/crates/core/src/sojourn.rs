/// Age process of a path: `ages[i]` counts the consecutive steps before `i`
/// spent in `path[i]`.
pub fn sojourn_of_path<T: PartialEq>(path: &[T]) -> Vec<usize> {
    let mut ages = Vec::with_capacity(path.len());
    for (i, x) in path.iter().enumerate() {
        let age = match i {
            0 => 0,
            _ if path[i - 1] == *x => ages[i - 1] + 1,
            _ => 0,
        };
        ages.push(age);
    }
    ages
}
