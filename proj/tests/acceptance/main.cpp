// Acceptance suite placeholder; filled in below.
int main() { return 1; }
